"""Training-free sigmoid networks for radial functions, with rate-based diagnostics."""

__version__ = "0.1.0"

from .activation import bell, bell_derivative, sigmoid, sigmoid_derivative  # noqa: E402
from .constructor import build_dno, build_univariate, norm_net, product_gate, square_net  # noqa: E402
from .netcore import LayeredNetwork, evaluate, parameter_count  # noqa: E402

__all__ = [
    "LayeredNetwork", "bell", "bell_derivative", "build_dno", "build_univariate",
    "evaluate", "norm_net", "parameter_count", "product_gate", "sigmoid",
    "sigmoid_derivative", "square_net", "__version__",
]
