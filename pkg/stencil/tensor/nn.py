import typing as t
from collections import OrderedDict

import numpy as np

from ..exceptions import DimensionError
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data: t.Any, name: str = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Container of parameters and child modules, registered in assignment order.

    The registration order is the stable parameter order used by checkpoints
    and by the optimizer state.
    """

    def __init__(self):
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())

    def __setattr__(self, name: str, value: t.Any):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name: str, module: 'Module'):
        self._modules[name] = module
        object.__setattr__(self, name, module)
        return module

    def named_parameters(self, prefix: str = '') -> t.Iterator[t.Tuple[str, Parameter]]:
        for name, parameter in self._parameters.items():
            yield prefix + name, parameter
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix + name + '.')

    def named_modules(self, prefix: str = '') -> t.Iterator[t.Tuple[str, 'Module']]:
        yield prefix.rstrip('.'), self
        for name, module in self._modules.items():
            yield from module.named_modules(prefix + name + '.')

    def parameters(self) -> t.List[Parameter]:
        return [parameter for _, parameter in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(parameter.size for parameter in self.parameters())

    def zero_grad(self):
        for parameter in self.parameters():
            parameter.zero_grad()

    def state_dict(self) -> 'OrderedDict[str, np.ndarray]':
        return OrderedDict((name, parameter.data.copy()) for name, parameter in self.named_parameters())

    def load_state_dict(self, state: t.Mapping[str, np.ndarray]):
        """Copy arrays into the parameters in place.

        :raises DimensionError: On a missing, unexpected or mis-shaped entry.
        """
        parameters = OrderedDict(self.named_parameters())
        missing = [name for name in parameters if name not in state]
        unexpected = [name for name in state if name not in parameters]
        if missing or unexpected:
            raise DimensionError(
                'State does not match the module.',
                details={'missing': missing, 'unexpected': unexpected}
            )
        for name, parameter in parameters.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != parameter.shape:
                raise DimensionError(f'{name}: expected shape {parameter.shape}, got {value.shape}.')
            parameter.data[...] = value

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(Module):
    def __init__(self, modules: t.Iterable[Module] = ()):
        super().__init__()
        self._items: t.List[Module] = []
        for module in modules:
            self.append(module)

    def append(self, module: Module):
        self.add_module(str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]
