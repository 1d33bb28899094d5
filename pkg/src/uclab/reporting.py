"""Artifact writers: CSV curves, 17-digit JSON, markdown summaries, provenance."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def _float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    text = format(v, ".17g")
    # keep floats recognizable as floats after a round trip
    if not any(ch in text for ch in ".eE"):
        text += ".0"
    return text


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with sorted keys, floats at 17 significant digits, NaN/inf as null."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(dumps(config, indent=0).encode()).hexdigest()


def provenance(config: dict) -> dict:
    return {"library_version": __version__, "config_hash": config_hash(config)}


def write_curve_csv(path, curve) -> None:
    """``n,mean,std_error,correction``; one row per sample size."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "mean", "std_error", "correction"])
        for row in curve.rows:
            writer.writerow([row.n, format(row.mean, ".17g"), format(row.std_error, ".17g"),
                             format(curve.correction, ".17g")])


def write_rows_csv(path, rows: list, columns: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format(row[c], ".17g") if isinstance(row[c], float) else row[c]
                             for c in columns])


def curve_payload(curve) -> dict:
    return {"kind": curve.kind, "correction": curve.correction, "net_count": curve.net_count,
            "net_radius": curve.net_radius, "approximate_net": curve.approximate,
            "rows": [{"n": r.n, "mean": r.mean, "std_error": r.std_error,
                      "solver_budget": r.solver_budget} for r in curve.rows],
            "replicate_values": [list(v) for v in curve.values],
            "metadata": curve.metadata}


# --- markdown ---------------------------------------------------------------

DESCRIPTIONS = {
    "uc-ncsc": (
        "Measured quantity: the mean over datasets of max over net points of "
        "||grad Phi(x) - grad Phi_S(x)||, with Phi the population primal and Phi_S "
        "its empirical counterpart (strongly concave inner problem). The expected "
        "decay is n^(-1/2). The net maximum underestimates the supremum over X by at "
        "most 2 L (1 + kappa) upsilon, reported as `correction` and not added."),
    "uc-ncc": (
        "Measured quantity: the mean over datasets of max over net points of "
        "||grad Phi^lam(x) - grad Phi_S^lam(x)|| = ||prox_{lam Phi}(x) - prox_{lam Phi_S}(x)|| / lam "
        "(merely concave inner problem, Moreau envelope gradients). The guaranteed "
        "decay is at least n^(-1/4). The correction 2 upsilon / (lam (1 - lam L)) bounds "
        "the net-to-supremum gap and is reported, not added."),
    "stability": (
        "Replace-one stability: ||y*_S(x) - y*_{S^(i)}(x)|| against 4 G / (mu n)."),
    "lemma-prox": (
        "Regularization gap: ||prox_{lam Phi}(x) - prox_{lam Phi_nu}(x)||^2 against "
        "nu D_Y lam / (1 - lam (L + nu)), where Phi_nu is the primal of "
        "F(x, y) - (nu/2)||y||^2."),
    "decompose": (
        "Error decomposition at the output x of projected gradient descent on Phi_S: "
        "||grad Phi(x)|| <= ||grad Phi_S(x)|| + ||grad Phi(x) - grad Phi_S(x)||, and the "
        "generalization term is compared with the net supremum of the same deviation."),
    "tails": (
        "Concentration at a fixed point: tail frequencies of |D - mean D| with "
        "D = ||grad Phi(x) - grad Phi_S(x)|| against 2 exp(-t^2 / (2 sigma^2)), "
        "sigma^2 = (2 L G / mu + G)^2 / n."),
    "selftest": "Quick consistency checks of the closed-form examples.",
}


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def markdown_report(subcommand: str, config: dict, sections: list, verdicts: list) -> str:
    """Render a human summary.

    ``sections`` is a list of ``(heading, body)`` where body is a string or a
    list of row dicts (rendered as a table); ``verdicts`` are VerificationReports.
    """
    prov = provenance(config)
    lines = [f"# uclab {subcommand}", "",
             f"- library version: {prov['library_version']}",
             f"- config hash: `{prov['config_hash']}`", ""]
    if subcommand in DESCRIPTIONS:
        lines += [DESCRIPTIONS[subcommand], ""]
    if verdicts:
        lines += ["## Verdicts", "", "| check | verdict | worst ratio | slack |",
                  "|---|---|---|---|"]
        for v in verdicts:
            lines.append(f"| {v.name} | {'PASS' if v.passed else 'FAIL'} | "
                         f"{_fmt(v.worst_ratio)} | {_fmt(v.slack)} |")
        lines.append("")
    for heading, body in sections:
        lines += [f"## {heading}", ""]
        if isinstance(body, str):
            lines += [body, ""]
            continue
        if body:
            cols = list(body[0])
            lines += ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
            lines += ["| " + " | ".join(_fmt(r[c]) for c in cols) + " |" for r in body]
            lines.append("")
    return "\n".join(lines)
