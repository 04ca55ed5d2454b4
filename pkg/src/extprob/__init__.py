"""Extinction probabilities of multitype branching processes on countable typesets."""
from .process import (Bernoulli, Deterministic, ExplicitFinite, ExplicitJoint, FiniteTypeset,
                      Geometric, GridTypeset, IndependentProduct, ProbVector, ProcessSpec, Window,
                      DomainError, ValidationError, canonical_process_from_dag, eval_generating_function,
                      explicit, finite_spec, irreducible_classes, is_non_singular, mean_matrix_entry,
                      product, single_type, type_graph)
from .subsets import SubsetSpec, union
from .solver import (ExtinctionResult, SolveConfig, SolverError, residual, solve_finite_modified,
                     solve_partial, solve_q, solve_q0, solve_qXA, verify_upper_bound)
from .family import (CardinalityClass, FamilyGraph, IndexSubset, class_signature, decompose,
                     detect_ascending_chains, enumerate_classes_bruteforce, enumerate_IA_finite,
                     equivalent, ext_cardinality, is_IA_element, make_family_graph, primitive_subsets,
                     upward_closure)
from .relations import (Kind, Relation, check_family_conditions, compare_extinction_vectors,
                        mc_relation_check, ratio_infimum, singleton_test)
from .montecarlo import (MCConfig, MCEstimate, estimate_event, estimate_extinction,
                         simulate_trajectory)

__version__ = "0.1.0"
