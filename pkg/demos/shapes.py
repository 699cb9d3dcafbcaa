"""Feature pyramid and logits shapes, parameter counts and FLOPs per configuration.

    python3 demos/shapes.py
"""

import numpy as np

from samba_seg import SambaSegmenter, Tensor, count_parameters, desk_config, estimate_flops, full_config, \
    no_grad, tiny_config


def main():
    model = SambaSegmenter(*tiny_config(7))
    model.eval()
    for size in (64, 128, 256):
        with no_grad():
            x = Tensor(np.zeros((1, 3, size, size)))
            feats = model.features(x)
            logits = model(x)
        print(f"{size}x{size}: " + "  ".join(str(f.shape[1:]) for f in feats) + f"  -> logits {logits.shape[1:]}")

    for name, cfg in (("tiny", tiny_config(7)), ("desk", desk_config(7)), ("full", full_config(7))):
        m = SambaSegmenter(*cfg)
        print(f"{name:<5} {count_parameters(m) / 1e6:8.2f} M params  {estimate_flops(m, 512, 512) / 1e9:8.1f} GFLOPs at 512x512")


if __name__ == "__main__":
    main()
