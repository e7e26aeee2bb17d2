"""chasesim: exact simulation and Monte Carlo toolkit for chase-escape
with conversion (white/red/blue Poisson dynamics on finite graphs)."""

from .graphs import (Graph, GraphFormatError, build_complete, build_path,
                     build_regular_tree, build_star, build_torus, parse_graph,
                     serialize_graph, validate)
from .process import (BAND, BLUE_CONV, BLUE_PRED, CLASSICAL_BLUE_NEIGHBOR,
                      ESCAPED, FIXATED, RED, STANDARD_ROOT, STEP_LIMIT_HIT,
                      TRUNCATION_HIT, WHITE, Configuration, EventRecord,
                      NegativeAlpha, NonPositiveLambda, ParamError,
                      ProcessParams, RunLimits, RunOutcome, gillespie_step,
                      init_configuration, per_clock_run, run_band_experiment,
                      run_to_fixation, run_with_states, snapshot, snapshot_csv)
from .reductions import (AlphaZero, BirthDeathTrace, FirstConversion,
                         JumpChainTrace, StarRace, ZeroHeight,
                         complete_race, complete_sample_X, jump_probabilities,
                         run_jump_chain, sample_first_conversion,
                         sample_X_via_jump_chain, star_race, star_sample_X)
from .couplings import (BadOrder, CoupledPair, DominanceReport, EmptyInput,
                        NotATree, TreeOutcome, TreePassageTimes,
                        complete_coupling, jumpchain_coupling, star_coupling,
                        tree_alpha_coupling, tree_passage_sample,
                        verify_dominance)
from .bounds import (INFINITE, BadDegree, BadInputs, GoodSiteSample,
                     expected_damage_bound, good_site_percolation_sim,
                     good_site_prob_lower, is_infinite, lambda_lower,
                     lambda_upper, path_survival_bound)
from .harness import (CompareReport, CrossingEstimate, DegenerateSupport,
                      EstimateRow, MultipleCrossings, NoCrossing, SweepSpec,
                      distribution_compare, escape_probability,
                      estimate_crossing, parse_sweep_csv, run_replicas,
                      sweep, sweep_csv, wilson_interval)

__version__ = "0.1.0"
