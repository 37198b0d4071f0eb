"""Single-file model artifacts (.npz with a JSON header, no pickling)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mlp import MlpModel
from .svm import MultiLabelLinearModel

FORMAT = "emoxling-model/1"
_KINDS = {"svm": MultiLabelLinearModel, "mlp": MlpModel}


def save_model(model: MultiLabelLinearModel | MlpModel, path: str | Path, extra: dict | None = None) -> None:
    kind = "svm" if isinstance(model, MultiLabelLinearModel) else "mlp"
    meta, arrays = model.to_arrays()
    header = {"format": FORMAT, "kind": kind, "model": meta, "extra": extra or {}}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_model(path: str | Path) -> tuple[MultiLabelLinearModel | MlpModel, dict]:
    """Returns the model and the `extra` metadata stored alongside it."""
    with np.load(path, allow_pickle=False) as npz:
        header = json.loads(str(npz["__header__"]))
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not an {FORMAT} artifact")
        arrays = {k: npz[k] for k in npz.files if k != "__header__"}
    model = _KINDS[header["kind"]].from_arrays(header["model"], arrays)
    return model, header["extra"]
