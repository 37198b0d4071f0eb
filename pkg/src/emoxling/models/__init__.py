from .io import load_model, save_model
from .mlp import EarlyStopping, MlpConfig, MlpModel, init_mlp, loss_and_grads, predict_mlp, train_mlp
from .svm import MultiLabelLinearModel, SvmConfig, predict, train_svm_ovr

__all__ = [
    "EarlyStopping", "MlpConfig", "MlpModel", "MultiLabelLinearModel", "SvmConfig",
    "init_mlp", "load_model", "loss_and_grads", "predict", "predict_mlp", "save_model",
    "train_mlp", "train_svm_ovr",
]
