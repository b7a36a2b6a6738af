#!/usr/bin/env python3
# Copyright 2026 The terrainseg Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts a PyTorch state dict into a terrainseg tensor archive (.tsnr)."""

import argparse
import json
import os
import struct

import numpy as np
import torch

MAGIC = b"TSEGTNSR"
VERSION = 1


def load_state_dict(args):
    if args.torchvision:
        import torchvision

        model = getattr(torchvision.models, args.torchvision)(weights=args.weights)
        return model.state_dict()
    state = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
    for key in ("state_dict", "model", "model_state_dict"):
        if isinstance(state, dict) and key in state and isinstance(state[key], dict):
            state = state[key]
    return state


def write_archive(state, path, meta):
    tensors = []
    offset = 0
    for name, value in state.items():
        if not torch.is_tensor(value) or not value.is_floating_point():
            continue
        data = value.detach().cpu().to(torch.float32).contiguous().numpy().astype("<f4")
        tensors.append((name, list(value.shape), data))
    header = {"meta": meta, "tensors": []}
    for name, shape, data in tensors:
        header["tensors"].append({"name": name, "shape": shape, "offset": offset})
        offset += data.size * 4
    text = json.dumps(header, separators=(",", ":")).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", VERSION))
        out.write(struct.pack("<Q", len(text)))
        out.write(text)
        for _, _, data in tensors:
            out.write(data.tobytes())
    os.replace(tmp, path)
    return len(tensors)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="torch.save file holding a state dict")
    source.add_argument("--torchvision", help="torchvision model builder, e.g. resnet50")
    parser.add_argument("--weights", default=None, help="torchvision weights enum name, e.g. IMAGENET1K_V1")
    parser.add_argument("--out", required=True, help="output .tsnr path")
    args = parser.parse_args()
    state = load_state_dict(args)
    count = write_archive(state, args.out, {"source": args.checkpoint or args.torchvision})
    print(f"wrote {count} tensors to {args.out}")


if __name__ == "__main__":
    main()
