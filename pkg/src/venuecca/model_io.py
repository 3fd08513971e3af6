"""Model and index files: one container, a JSON header, binary blocks.

Serialization is byte-deterministic: headers are JSON with sorted keys,
blocks are raw little-endian float64 matrices in a fixed order. Saving
the same model twice yields identical bytes, which the pipeline's
reproducibility guarantee leans on.
"""

from dataclasses import asdict

import numpy as np

from . import dataio
from .cca import LinearCcaModel
from .dcca import DeepCcaModel
from .kcca import KernelCcaModel
from .neural import Layer, MlpNetwork, Standardizer, TrainConfig
from .retrieval import VenueIndex

KIND_LINEAR = "linear-cca"
KIND_KERNEL = "kernel-cca"
KIND_DEEP = "deep-cca"
KIND_INDEX = "venue-index"


def _head_blocks(head, prefix=""):
    return {
        f"{prefix}mean_x": head.mean_x[None, :],
        f"{prefix}mean_y": head.mean_y[None, :],
        f"{prefix}Wx": head.Wx,
        f"{prefix}Wy": head.Wy,
        f"{prefix}rho": head.rho[None, :],
    }


def _head_meta(head, prefix=""):
    return {
        f"{prefix}r": head.r,
        f"{prefix}beta": head.beta,
        f"{prefix}k": int(head.k),
        f"{prefix}dims": [int(head.mean_x.shape[0]), int(head.mean_y.shape[0])],
    }


def _head_from(meta, blocks, prefix=""):
    return LinearCcaModel(
        mean_x=blocks[f"{prefix}mean_x"][0],
        mean_y=blocks[f"{prefix}mean_y"][0],
        Wx=blocks[f"{prefix}Wx"],
        Wy=blocks[f"{prefix}Wy"],
        rho=blocks[f"{prefix}rho"][0],
        r=float(meta[f"{prefix}r"]),
        beta=float(meta[f"{prefix}beta"]),
    )


def _net_blocks(net, prefix):
    blocks = {
        f"{prefix}std_mean": net.standardizer.mean[None, :],
        f"{prefix}std_std": net.standardizer.std[None, :],
    }
    for i, layer in enumerate(net.layers):
        blocks[f"{prefix}W{i}"] = layer.W
        blocks[f"{prefix}b{i}"] = layer.b[None, :]
    return blocks


def _net_meta(net):
    return [
        {"activation": l.activation, "dropout_rate": l.dropout_rate}
        for l in net.layers
    ]


def _net_from(layer_meta, blocks, prefix):
    std = Standardizer(
        mean=blocks[f"{prefix}std_mean"][0], std=blocks[f"{prefix}std_std"][0]
    )
    layers = [
        Layer(
            W=blocks[f"{prefix}W{i}"],
            b=blocks[f"{prefix}b{i}"][0],
            activation=m["activation"],
            dropout_rate=m["dropout_rate"],
        )
        for i, m in enumerate(layer_meta)
    ]
    return MlpNetwork(std, layers)


def save_model(model, path):
    if isinstance(model, LinearCcaModel):
        dataio.write_container(path, KIND_LINEAR, _head_meta(model), _head_blocks(model))
    elif isinstance(model, KernelCcaModel):
        meta = _head_meta(model.head, "head_")
        meta.update(
            {
                "kernel": model.kernel,
                "sigma_x": model.sigma_x,
                "sigma_y": model.sigma_y,
                "grand_x": model.grand_x,
                "grand_y": model.grand_y,
                "r": model.r,
                "beta": model.beta,
            }
        )
        blocks = {
            "Xtrain": model.Xtrain,
            "Ytrain": model.Ytrain,
            "mu_x": model.mu_x[None, :],
            "mu_y": model.mu_y[None, :],
        }
        blocks.update(_head_blocks(model.head, "head_"))
        dataio.write_container(path, KIND_KERNEL, meta, blocks)
    elif isinstance(model, DeepCcaModel):
        config = model.config
        meta = {
            "config": asdict(config) if not isinstance(config, dict) else config,
            "net_x_layers": _net_meta(model.net_x),
            "net_y_layers": _net_meta(model.net_y),
        }
        meta.update(_head_meta(model.head, "head_"))
        blocks = {}
        blocks.update(_net_blocks(model.net_x, "net_x_"))
        blocks.update(_net_blocks(model.net_y, "net_y_"))
        blocks.update(_head_blocks(model.head, "head_"))
        blocks["history_objective"] = model.history_objective[None, :]
        blocks["history_epoch"] = model.history_epoch[None, :].astype(float)
        dataio.write_container(path, KIND_DEEP, meta, blocks)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")


def load_model(path):
    kind, meta, blocks = dataio.read_container(path)
    if kind == KIND_LINEAR:
        return _head_from(meta, blocks)
    if kind == KIND_KERNEL:
        return KernelCcaModel(
            Xtrain=blocks["Xtrain"],
            Ytrain=blocks["Ytrain"],
            kernel=meta["kernel"],
            sigma_x=float(meta["sigma_x"]),
            sigma_y=float(meta["sigma_y"]),
            mu_x=blocks["mu_x"][0],
            mu_y=blocks["mu_y"][0],
            grand_x=float(meta["grand_x"]),
            grand_y=float(meta["grand_y"]),
            head=_head_from(meta, blocks, "head_"),
            r=float(meta["r"]),
            beta=float(meta["beta"]),
        )
    if kind == KIND_DEEP:
        cfg = dict(meta["config"])
        cfg["hidden_sizes"] = tuple(cfg["hidden_sizes"])
        return DeepCcaModel(
            net_x=_net_from(meta["net_x_layers"], blocks, "net_x_"),
            net_y=_net_from(meta["net_y_layers"], blocks, "net_y_"),
            head=_head_from(meta, blocks, "head_"),
            config=TrainConfig(**cfg),
            history_objective=blocks["history_objective"][0],
            history_epoch=blocks["history_epoch"][0].astype(int),
        )
    raise dataio.DatasetError(f"{path}: unknown model kind {kind!r}")


def save_index(index, path):
    meta = {"venue_ids": list(index.venue_ids)}
    blocks = {
        "vectors": index.vectors,
        "coords": index.coords,
        "categories": index.categories[None, :].astype(float),
    }
    dataio.write_container(path, KIND_INDEX, meta, blocks)


def load_index(path):
    kind, meta, blocks = dataio.read_container(path)
    if kind != KIND_INDEX:
        raise dataio.DatasetError(f"{path}: not a venue index (kind {kind!r})")
    return VenueIndex(
        venue_ids=list(meta["venue_ids"]),
        categories=blocks["categories"][0].astype(int),
        coords=blocks["coords"],
        vectors=blocks["vectors"],
    )
