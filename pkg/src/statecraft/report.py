"""Canonical serialization of runs and reports, plus figure rendering.

All JSON produced here is canonical: object keys are stringified and
sorted, floats are fixed to six fractional digits, and separators are
exactly ``", "`` / ``": "``.  Identical inputs therefore serialize to
identical bytes, which the CLI and service rely on.
"""

from __future__ import annotations

import json
import math
import os
from typing import Mapping

from .engine import ScenarioReport, Trajectory


def _canon(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"canonical JSON cannot carry {value!r}")
        if value == 0:
            value = 0.0  # collapse negative zero
        return "%.6f" % value
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, Mapping):
        items = sorted((str(k), v) for k, v in value.items())
        inner = ", ".join(f"{json.dumps(k)}: {_canon(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(value, (list, tuple, set, frozenset)):
        if isinstance(value, (set, frozenset)):
            value = sorted(value)
        return "[" + ", ".join(_canon(v) for v in value) + "]"
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def canonical_json(value) -> str:
    """Deterministic JSON text for a tree of plain values."""
    return _canon(value)


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    """Plain-value view of a finished run, ready for canonical export."""
    return {
        "scenario_id": trajectory.scenario_id,
        "model_hash": trajectory.model_hash,
        "horizon": trajectory.horizon,
        "dynamics": {
            diagram_id: {
                "occupancy": {
                    s: list(series) for s, series in dyn.occupancy.items()
                },
                "transition_counts": {
                    a: list(series)
                    for a, series in dyn.transition_counts.items()
                },
                "in_transit": list(dyn.in_transit),
            }
            for diagram_id, dyn in trajectory.dynamics.items()
        },
        "events": [event.to_dict() for event in trajectory.events],
        "applied": {
            d: [list(symbols) for symbols in series]
            for d, series in trajectory.applied.items()
        },
        "modal": {d: list(series) for d, series in trajectory.modal.items()},
        "criterion": {
            d: [float(v) for v in series]
            for d, series in trajectory.criterion.items()
        },
        "resource_series": {
            d: [float(v) for v in series]
            for d, series in trajectory.resource_series.items()
        },
        "resource_total": float(trajectory.resource_total),
        "redundancy_count": trajectory.redundancy_count,
        "omitted_backsteps": trajectory.omitted_backsteps,
        "backstep_count": trajectory.backstep_count,
        "forward_completions": trajectory.forward_completions,
        "coupled_forward": trajectory.coupled_forward,
    }


def export_report(subject) -> bytes:
    """Canonical UTF-8 document for a report, a trajectory, or a plain
    mapping already shaped for export.  Byte-identical across repeated
    calls with equal inputs."""
    if isinstance(subject, ScenarioReport):
        payload = subject.to_dict()
    elif isinstance(subject, Trajectory):
        payload = trajectory_to_dict(subject)
    elif isinstance(subject, Mapping):
        payload = subject
    else:
        raise TypeError(
            f"cannot export {type(subject).__name__}; expected a report, "
            "a trajectory, or a mapping"
        )
    return (canonical_json(payload) + "\n").encode("utf-8")


# -- figures and delimited series --------------------------------------------


def write_series_csvs(trajectory: Trajectory, out_dir: str) -> list:
    """Per-diagram occupancy and counter series as CSV files; returns the
    paths written."""
    paths = []
    for diagram_id, dyn in trajectory.dynamics.items():
        states = [s.id for s in dyn.diagram.states]
        occupancy_path = os.path.join(out_dir, f"{diagram_id}_occupancy.csv")
        with open(occupancy_path, "w", encoding="utf-8") as fp:
            fp.write(",".join(["tick"] + states + ["in_transit"]) + "\n")
            for tick in range(trajectory.horizon + 1):
                row = [str(tick)]
                row += [str(dyn.occupancy[s][tick]) for s in states]
                row.append(str(dyn.in_transit[tick]))
                fp.write(",".join(row) + "\n")
        paths.append(occupancy_path)

        arcs = [a.id for a in dyn.diagram.arcs]
        counters_path = os.path.join(out_dir, f"{diagram_id}_counters.csv")
        with open(counters_path, "w", encoding="utf-8") as fp:
            fp.write(",".join(["tick"] + arcs) + "\n")
            for tick in range(trajectory.horizon + 1):
                row = [str(tick)]
                row += [str(dyn.transition_counts[a][tick]) for a in arcs]
                fp.write(",".join(row) + "\n")
        paths.append(counters_path)
    return paths


def render_figures(trajectory: Trajectory, out_dir: str) -> list:
    """Occupancy chart per diagram as PNG, plus the series CSVs.

    Returns all written paths sorted.  Uses a non-interactive rendering
    backend so it works headless.
    """
    os.makedirs(out_dir, exist_ok=True)
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    paths = write_series_csvs(trajectory, out_dir)
    ticks = range(trajectory.horizon + 1)
    for diagram_id, dyn in trajectory.dynamics.items():
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        for state in dyn.diagram.states:
            ax.plot(ticks, dyn.occupancy[state.id], marker="o",
                    label=state.id)
        ax.plot(ticks, dyn.in_transit, linestyle="--", color="gray",
                label="in transit")
        ax.set_xlabel("tick")
        ax.set_ylabel("objects")
        ax.set_title(f"{diagram_id}: occupancy")
        ax.legend(loc="best", fontsize="small")
        ax.set_xticks(list(ticks))
        fig.tight_layout()
        figure_path = os.path.join(out_dir, f"{diagram_id}_occupancy.png")
        fig.savefig(figure_path, dpi=110)
        plt.close(fig)
        paths.append(figure_path)
    return sorted(paths)
