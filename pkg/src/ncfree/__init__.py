"""Non-commutative calculus, random-matrix ensembles, and free-probability
trace formulas, with a verification harness for their quantitative behavior
at desk scale."""

__version__ = "0.1.0"

from .dsl import parse, to_text
from .ensembles import EnsembleSpec, EntryLaw, SeedStream, goe, gue, wigner
from .expr import (AlphaForm, ExpAtom, Letter, NcExpr, TensorExpr, TensorTerm,
                   adjoint, cyclic_derivative, is_self_adjoint, nc_derivative,
                   normalize, tensor_contract)
from .fourier import FourierSum
from .freeprob import (FreeWord, NcPartition, catalan,
                       conditional_expectation_scalar, free_expr_scalar,
                       free_expr_trace, free_surrogate_trace, free_word_trace,
                       freeness_oracle_trace, fourier_norm, kreweras,
                       nc_pair_partitions, semicircle_moment)
from .matrices import (Context, evaluate, evaluate_tensor, herm_funcalc,
                       trace_forms, ts)

__all__ = [name for name in dir() if not name.startswith("_")]
