# SPDX-License-Identifier: Apache-2.0
"""Zero-state-skipping LSTM: quantization, pruning, sparse encoding and the accelerator model."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
