"""Data-plane verification over header equivalence classes.

The header space of a rule collection is split into atoms, the classes of
headers matching exactly the same rules.  One representative per atom is
enough to decide loop freedom, black holes, reachability and consistency.
"""

from .algebra import (
    AtomEntry,
    AtomReport,
    EmptyRule,
    RuleCollection,
    WeakCompletion,
    atom_cardinalities,
    build,
    check_weak_completeness,
)
from .distributed import (
    LocalCheckReport,
    LocalVerdict,
    LoopExists,
    PreconditionViolated,
    ProofLabeling,
    check_more_specific,
    check_no_loop_more_specific,
    generate_proof_labels,
    local_check_no_blackhole,
    verify_proof_labels,
)
from .headerset import Field, FieldKind, HeaderLayout, HeaderSet, HeaderSetError, LayoutMismatch, parse_set
from .network import (
    DELIVER,
    DROP,
    Action,
    ActionKind,
    ClassGraph,
    Fate,
    ForwardingRule,
    NetworkError,
    NetworkInstance,
    TrackedNetwork,
    VerificationReport,
    Witness,
    build_class_graphs,
    check_consistency,
    check_no_blackhole,
    check_no_loop,
    check_reachability,
    trace,
)

__version__ = "0.1.0"
