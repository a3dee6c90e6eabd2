"""Python bindings for the plansmith toolkit."""

from ._plansmith import (
    MiniWorld,
    PlansmithError,
    assemble_context,
    count_tokens,
    distill,
    fusion_report,
    generate_task,
    parse_output,
    percent,
    plan_trajectory,
    render_output,
    render_table,
    rollout,
    run_cli,
    stratum_for_length,
    success_rate,
    token_budget,
)

__all__ = [
    "MiniWorld",
    "PlansmithError",
    "assemble_context",
    "count_tokens",
    "distill",
    "fusion_report",
    "generate_task",
    "parse_output",
    "percent",
    "plan_trajectory",
    "render_output",
    "render_table",
    "rollout",
    "run_cli",
    "stratum_for_length",
    "success_rate",
    "token_budget",
]
