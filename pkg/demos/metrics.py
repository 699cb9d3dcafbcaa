"""Confusion matrix and per-class IoU on a hand-sized example.

    python3 demos/metrics.py
"""

import numpy as np

from samba_seg import ConfusionMatrix, miou


def main():
    gt = np.array([[0, 0, 1, 1],
                   [0, 2, 2, 1],
                   [255, 2, 2, 1]])
    pred = np.array([[0, 1, 1, 1],
                     [0, 2, 1, 1],
                     [0, 2, 2, 2]])
    # the ignored corner pixel (255) contributes nothing
    cm = ConfusionMatrix(3).update(pred, gt)
    print("counts [gt, pred]:")
    print(cm.counts)
    print("TP", cm.tp, "FP", cm.fp, "FN", cm.fn)
    iou, mean = miou(cm)
    print("IoU", np.round(iou, 4), f"mIoU {mean:.4f}")
    _, without_2 = miou(cm, included_classes=[0, 1])
    print(f"mIoU over classes 0 and 1 only: {without_2:.4f}")


if __name__ == "__main__":
    main()
