from .arch_spec import ArchSpec, ConvLayerSpec, PoolLayerSpec, FullLayerSpec, parse_arch
from .train_config import TrainConfig, default_lr_drop_epochs
from .network import Network, ForwardCache, build_network, parameter_shapes
