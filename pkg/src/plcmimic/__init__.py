"""PLC behavior cloning toolkit.

Simulates a PLC with configurable protocol surface and physics, probes it
to build boundary-weighted training corpora, scores candidate emulators
with byte-exact / validity / epsilon-tolerant metrics, and serves a
honeypot front-end backed by an exact oracle or an external model.
"""

from .config import ControlLoopSpec, MathBlockSpec, ProtocolConfig
from .dataset import SamplePair

__all__ = ["ControlLoopSpec", "MathBlockSpec", "ProtocolConfig", "SamplePair"]
__version__ = "0.1.0"
