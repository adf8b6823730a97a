"""Python access to the prefixevo core: taxonomy annotation, prompt builders, metrics, CLI."""

from ._core import (  # noqa: F401
    BEHAVIORS,
    Error,
    __version__,
    annotate,
    build_crossover_prompt,
    build_mutation_prompt,
    check_constraints,
    compute_acu,
    fleiss_kappa,
    parse_crossover_output,
    parse_judge_verdict,
    prefix_id,
    run_cli,
    select_on_frontier,
    split_ids,
)
