"""Electroneutral multicomponent electrolyte flow with mixed finite elements."""
import os

import jax

# OSMIUM_THREADS limits the CPU threads used by the compiled assembly kernels
if os.environ.get("OSMIUM_THREADS"):
    os.environ["XLA_FLAGS"] = (os.environ.get("XLA_FLAGS", "") + " --xla_cpu_multi_thread_eigen=false "
                               f"intra_op_parallelism_threads={int(os.environ['OSMIUM_THREADS'])}").strip()

jax.config.update("jax_enable_x64", True)
# compiled assembly kernels are cached on disk; set OSMIUM_JAX_CACHE="" to disable
_cache_dir = os.environ.get("OSMIUM_JAX_CACHE", os.path.join(os.path.expanduser("~"), ".cache", "osmium", "jax"))
if _cache_dir:
    jax.config.update("jax_compilation_cache_dir", _cache_dir)
    jax.config.update("jax_persistent_cache_min_compile_time_secs", 0.5)

from .species import CONSTANTS, Species, SpeciesSystem, ThermodynamicState, validate_system  # noqa: E402
from .saltcharge import SaltChargeBasis, auto_basis, build_transform, validate_basis  # noqa: E402

__all__ = [
    "CONSTANTS",
    "Species",
    "SpeciesSystem",
    "ThermodynamicState",
    "validate_system",
    "SaltChargeBasis",
    "auto_basis",
    "build_transform",
    "validate_basis",
]
__version__ = "0.1.0"
