"""asymdynkin: a numerical laboratory for stopping games with asymmetric information.

Three layers:

* :mod:`asymdynkin.core` -- trees, generating processes, randomization
  devices, exact and Monte Carlo payoff evaluation;
* :mod:`asymdynkin.scenario` / :mod:`asymdynkin.oracle` -- the hidden-regime
  scenario game: belief updates, best-response surfaces, node-by-node
  martingale/support reports, saddle certificates, and the enumerate-and-solve
  LP equilibrium oracle;
* :mod:`asymdynkin.dynamics` -- the continuous-state companion: filtering SDE
  simulation, the coupled free-boundary PDE system, strategy extraction and
  Monte Carlo verification.
"""

from .core import (
    FiltrationTree,
    GeneratingProcess,
    PayoffTriple,
    RandomDevice,
    StoppingRule,
    TimeGrid,
    binary_tree,
    expected_payoff_exact,
    expected_payoff_mc,
    realized_payoff,
    sample_stopping_time,
    single_path_tree,
    truncate_control,
    validate_generating,
)
from .oracle import (
    EnumerationCapExceeded,
    MixedSolution,
    build_matrix,
    enumerate_stopping_rules,
    mixture_to_generating,
    pure_gap,
    solve_scenario,
    solve_zero_sum,
)
from .scenario import (
    Certificate,
    ScenarioGame,
    StrategyProfile,
    ValueSurfaces,
    belief_update,
    best_response_values,
    certify_mart,
    certify_stop,
    ex_ante_check,
    martingale_report,
    support_report,
)

__version__ = "0.1.0"
