"""Semifactual explanations for reinforcement learning policies.

Generates "even if" explanations for a policy's action choice: states
reachable by alternative action sequences (forward from the state, or
backward by rewriting recent history) in which the policy still picks
the same action. Candidates are found by multi-objective evolutionary
search and returned as a Pareto front over path length, outcome
uncertainty, policy fidelity, and path surprise.
"""
from .baseline import (
    PATH_NOT_FOUND,
    BaselineConfig,
    BaselineResult,
    ScoredBaselineState,
    find_action_path,
    score_baseline,
    sgen_explain,
)
from .envs import (
    ENV_NAMES,
    FrozenLake,
    FrozenLakeConfig,
    GridAction,
    Gridworld,
    GridworldConfig,
    LakeAction,
    Trajectory,
    Transition,
    make_env,
    replay,
    reset,
)
from .generators import (
    Direction,
    ExplanationRequest,
    ExplanationSet,
    SemifactualCandidate,
    advance_explain,
    explain,
    rewind_explain,
    score_candidate,
    select_presentation,
)
from .harness import (
    METHODS,
    ExperimentConfig,
    FactualRecord,
    MethodMetrics,
    MetricsTable,
    collect_factuals,
    emit_report,
    explain_one,
    read_report_csv,
    run_experiment,
)
from .optimizer import (
    Individual,
    MooConfig,
    crowding_distance,
    dominates,
    evolve,
    nondominated_sort,
    pareto_front,
)
from .policy import (
    QFunction,
    QTable,
    TrainingConfig,
    action_distribution,
    greedy_action,
    load_qtable,
    save_qtable,
    train,
)
from .properties import (
    DiversityScores,
    PropertyScores,
    Rollout,
    diversity,
    exceptionality,
    execute_actions,
    fidelity,
    gain,
    stochastic_uncertainty,
    temporal_distance,
    validity,
)

__version__ = "0.1.0"
