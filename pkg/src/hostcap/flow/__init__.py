from .model import ConditionalCouplingFlow, TrainConfig, identity_flow, load_flow

__all__ = ["ConditionalCouplingFlow", "TrainConfig", "identity_flow", "load_flow"]
