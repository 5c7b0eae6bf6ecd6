#!/usr/bin/env python3
"""Writes the CIFAR-10 MobileNetV2 and EfficientNet-B0 shape files into configs/."""
import json
import math
import os
import sys


def shift_for(depth):
    # keeps random int8 activations roughly in range after each layer
    return 7 + math.ceil(math.log2(depth) / 2)


class Net:
    def __init__(self, name, h, w, c):
        self.name, self.h, self.w, self.c = name, h, w, c
        self.layers = []

    def add(self, lid, kind, n, k=1, stride=1, post=None):
        pad = (k - 1) // 2 if kind in ("std", "dw") else 0
        depth = k * k * (1 if kind == "dw" else self.c)
        e = {"id": lid, "kind": kind, "H": self.h, "W": self.w, "C": self.c, "N": n, "K": k,
             "stride": stride, "pad": pad, "fcc_enabled": kind != "fc", "shift": shift_for(depth)}
        if post:
            e["post"] = post
        self.layers.append(e)
        if kind != "fc":
            self.h = (self.h + 2 * pad - k) // stride + 1
            self.w = (self.w + 2 * pad - k) // stride + 1
        if post == "avgpool":
            self.h = self.w = 1
        self.c = n

    def block(self, prefix, t, c, k, s):
        if t != 1:
            self.add(prefix + "_expand", "pw", self.c * t)
        self.add(prefix + "_dw", "dw", self.c, k, s)
        self.add(prefix + "_project", "pw", c)

    def dump(self, path):
        with open(path, "w") as f:
            json.dump({"name": self.name, "layers": self.layers}, f, indent=1)
            f.write("\n")


def mobilenetv2():
    n = Net("mobilenetv2_cifar10", 32, 32, 3)
    n.add("stem", "std", 32, 3)
    stages = [(1, 16, 1, 1), (6, 24, 2, 1), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    for si, (t, c, reps, s) in enumerate(stages):
        for r in range(reps):
            n.block(f"s{si}b{r}", t, c, 3, s if r == 0 else 1)
    n.add("head", "pw", 1280, post="avgpool")
    n.add("fc", "fc", 10)
    return n


def efficientnet_b0():
    n = Net("efficientnet_b0_cifar10", 32, 32, 3)
    n.add("stem", "std", 32, 3)
    stages = [(1, 16, 1, 3, 1), (6, 24, 2, 3, 2), (6, 40, 2, 5, 2), (6, 80, 3, 3, 2), (6, 112, 3, 5, 1),
              (6, 192, 4, 5, 2), (6, 320, 1, 3, 1)]
    for si, (t, c, reps, k, s) in enumerate(stages):
        for r in range(reps):
            n.block(f"s{si}b{r}", t, c, k, s if r == 0 else 1)
    n.add("head", "pw", 1280, post="avgpool")
    n.add("fc", "fc", 10)
    return n


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "configs")
    mobilenetv2().dump(os.path.join(out, "mobilenetv2_cifar10.json"))
    efficientnet_b0().dump(os.path.join(out, "efficientnet_b0_cifar10.json"))
