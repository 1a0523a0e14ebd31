"""Cache-aware orchestration shared by the command line and the tests."""
from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path

import gmpy2

from ._mp import to_decimal, working_precision
from .asymptotics import AsymptoticModel, plot_rows, validation_report, write_plot_csv
from .config import RunConfig
from .errors import CacheCorrupt
from .invariants import (
    InvariantTable,
    build_tables,
    genus0_table,
    genus1_table,
    verify_bounds,
    verify_wdvv_series,
)
from .singularity import DEFAULT_D_LIST, SingularityReport, analyze
from .tablefile import parse_table, write_table

log = logging.getLogger(__name__)

__all__ = [
    "load_cached",
    "ensure_table",
    "ensure_tables",
    "d_list_for",
    "run_singularity",
    "load_or_run_singularity",
    "run_asymptotics",
    "run_verify",
    "render_report",
    "dump_json",
]


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(text)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def load_cached(path: Path, dmax: int, mode: str) -> InvariantTable | None:
    """A valid cached table covering ``dmax``, or None (corruption is logged)."""
    if not path.exists():
        return None
    try:
        tf = parse_table(path.read_text())
    except CacheCorrupt as exc:
        log.warning("cache %s unreadable (%s); recomputing", path, exc)
        return None
    if not tf.ok:
        log.warning("cache %s failed integrity checks (%s); recomputing",
                    path, ", ".join(tf.problems))
        return None
    t = tf.table
    if t.dmax < dmax:
        return None
    if mode == "exact" and t.exact_dmax < dmax:
        return None
    return t


def ensure_table(cfg: RunConfig, genus: int, dmax: int, mode: str,
                 out: Path | None = None) -> InvariantTable:
    """Table for ``genus`` through ``dmax``; reuses a valid covering cache.

    Valid cache files are never rewritten.  ``out`` (if given) receives
    exactly the records 1..dmax.
    """
    if mode not in ("exact", "scaled"):
        raise ValueError(f"mode must be 'exact' or 'scaled', got {mode!r}")
    path = cfg.table_path(genus, mode)
    table = load_cached(path, dmax, mode)
    if table is None:
        if mode == "exact":
            g0 = genus0_table(dmax) if genus == 0 else ensure_table(cfg, 0, dmax, "exact")
            table = g0 if genus == 0 else genus1_table(dmax, g0)
            write_table(path, table, dmax, "exact")
        else:
            g0, g1 = build_tables(min(cfg.d_exact, dmax), dmax, cfg.precision_bits)
            for g, t in ((0, g0), (1, g1)):
                p = cfg.table_path(g, "scaled")
                if load_cached(p, dmax, "scaled") is None:
                    write_table(p, t, dmax, "auto")
            table = g0 if genus == 0 else g1
        log.info("computed genus-%d %s table through d = %d", genus, mode, dmax)
    if out is not None:
        write_table(out, table, dmax, "exact" if mode == "exact" else "auto")
    return table


def ensure_tables(cfg: RunConfig):
    g0 = ensure_table(cfg, 0, cfg.d_float, "scaled")
    g1 = ensure_table(cfg, 1, cfg.d_float, "scaled")
    return g0, g1


def d_list_for(dmax: int):
    """Truncation orders for the series-based x0, scaled to the table size."""
    if dmax >= DEFAULT_D_LIST[-1]:
        return DEFAULT_D_LIST
    ds = sorted({max(4, round(dmax * f)) for f in (0.05, 0.1, 0.2, 0.4, 0.8, 1.0)})
    return tuple(ds) if len(ds) >= 3 else ()


def run_singularity(cfg: RunConfig, g0: InvariantTable | None = None) -> SingularityReport:
    if g0 is None:
        g0 = ensure_table(cfg, 0, cfg.d_float, "scaled")
    rep = analyze(g0, precision_bits=cfg.precision_bits, z_init=cfg.z_init,
                  taylor_order=cfg.taylor_order, N=cfg.N, D_list=d_list_for(g0.dmax),
                  cross_tol=cfg.tolerances["x0_cross_method"])
    _write_text(cfg.report_path("singularity"), dump_json(rep.to_json()))
    return rep


def load_or_run_singularity(cfg: RunConfig, g0=None) -> SingularityReport:
    path = cfg.report_path("singularity")
    if path.exists():
        rep = SingularityReport.from_json(json.loads(path.read_text()))
        meta = rep.meta
        if (rep.N == cfg.N and meta.get("taylor_order") == cfg.taylor_order
                and meta.get("D_list") == (list(d_list_for(cfg.d_float)) or None)):
            return rep
    return run_singularity(cfg, g0)


def run_asymptotics(cfg: RunConfig, tables=None, report=None) -> dict:
    """Validation summary; writes the JSON report and the plot-data CSV."""
    g0, g1 = tables if tables is not None else ensure_tables(cfg)
    if report is None:
        report = load_or_run_singularity(cfg, g0)
    tol = cfg.tolerances
    with working_precision(cfg.precision_bits):
        summary = validation_report(
            g0, g1, report,
            tol_ratio0=tol["ratio_genus0"], tol_ratio1=tol["ratio_genus1"],
            tol_slope=tol["slope"],
        )
        rows = []
        for genus, table in ((0, g0), (1, g1)):
            m = AsymptoticModel.from_report(report, genus, cfg.N)
            rows.extend(plot_rows(table, m, range(1, table.dmax + 1)))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_plot_csv(cfg.report_path("asymptotics", "csv"), rows)
    _write_text(cfg.report_path("asymptotics"), dump_json(summary))
    return summary


def _compare_tables(cached: InvariantTable, fresh: InvariantTable, limit: int = 10):
    """Degrees where a cached table differs from a recomputation."""
    diffs = []
    for d in range(1, cached.dmax + 1):
        if d in cached.values:
            a, b = cached.values[d], fresh.values.get(d)
            if b is not None and a != b:
                diffs.append({"d": d, "cached": to_decimal(a), "recomputed": to_decimal(b)})
        elif cached.scaled is not None and d in cached.scaled:
            a, b = cached.scaled[d], fresh.scaled[d]
            if a != b:
                with working_precision(cached.precision_bits):
                    rel = abs(a - b) / abs(b) if b != 0 else abs(a)
                diffs.append({"d": d, "cached": to_decimal(a), "recomputed": to_decimal(b),
                              "relative_difference": to_decimal(rel, 6)})
        if len(diffs) >= limit:
            break
    return diffs


def _suite_cache(cfg: RunConfig) -> dict:
    files = {}
    for genus in (0, 1):
        for mode in ("exact", "scaled"):
            path = cfg.table_path(genus, mode)
            if not path.exists():
                continue
            entry = {"path": str(path)}
            try:
                tf = parse_table(path.read_text())
            except CacheCorrupt as exc:
                files[path.name] = {**entry, "pass": False, "problems": [str(exc)]}
                continue
            t = tf.table
            if mode == "exact":
                e0 = genus0_table(t.dmax)
                fresh = e0 if genus == 0 else genus1_table(t.dmax, e0)
            else:
                fresh = build_tables(min(cfg.d_exact, t.dmax), t.dmax, t.precision_bits)[genus]
            diffs = _compare_tables(t, fresh)
            files[path.name] = {**entry, "dmax": t.dmax, "checksum_ok": tf.checksum_ok,
                                "problems": tf.problems, "discrepancies": diffs,
                                "pass": tf.ok and not diffs}
    return {"files": files, "pass": all(f["pass"] for f in files.values())}


def _cached_or_fresh_exact(cfg: RunConfig, genus: int, dmax: int) -> InvariantTable:
    """Exact table read from the cache as-is (even if damaged), else computed."""
    path = cfg.table_path(genus, "exact")
    if path.exists():
        try:
            t = parse_table(path.read_text()).table
            if t.exact_dmax >= dmax:
                return t
        except CacheCorrupt:
            pass
    return ensure_table(cfg, genus, dmax, "exact")


def _suite_wdvv(cfg: RunConfig, order: int = 60) -> dict:
    order = min(order, cfg.d_exact)
    g0 = _cached_or_fresh_exact(cfg, 0, order)
    rep = verify_wdvv_series(g0, order)
    out = {"order": order, "pass": rep.ok}
    if not rep.ok:
        k = rep.first_nonzero
        out["first_nonzero_order"] = k
        out["residual"] = to_decimal(rep.residuals[k - 1])
    # genus one against its recursion from the same genus-0 values
    g1 = _cached_or_fresh_exact(cfg, 1, order)
    fresh1 = genus1_table(order, g0)
    bad = [d for d in range(1, order + 1) if g1.values[d] != fresh1.values[d]]
    out["genus1_recursion"] = {"pass": not bad, "degrees": bad[:10]}
    out["pass"] = out["pass"] and not bad
    return out


def _suite_bounds(cfg: RunConfig) -> dict:
    g0 = _cached_or_fresh_exact(cfg, 0, cfg.d_exact)
    bad = verify_bounds(g0, cfg.d_exact)
    out = {"dmax": cfg.d_exact, "violations": bad[:20], "count": len(bad), "pass": not bad}
    if bad:
        d = bad[0]
        out["first"] = {"d": d, "value": to_decimal(g0.values[d])}
    return out


def _suite_asymptotics(cfg: RunConfig) -> dict:
    tables = ensure_tables(cfg)
    rep = load_or_run_singularity(cfg, tables[0])
    summary = run_asymptotics(cfg, tables, rep)
    sing = {"checks": rep.checks, "pass": rep.ok}
    return {"singularity": sing, "validation": summary,
            "pass": sing["pass"] and summary["pass"]}


SUITES = {
    "cache": _suite_cache,
    "wdvv": _suite_wdvv,
    "bounds": _suite_bounds,
    "asymptotics": _suite_asymptotics,
}


def run_verify(cfg: RunConfig, suite: str = "all") -> dict:
    names = list(SUITES) if suite == "all" else [suite]
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite {suite!r}")
    results = {n: SUITES[n](cfg) for n in names}
    return {"suites": results, "pass": all(r["pass"] for r in results.values())}


def render_report(rep: SingularityReport, validation: dict | None = None) -> str:
    """Plain-text summary of the singularity data and the validation."""
    with working_precision(rep.precision_bits):
        lines = [
            f"precision_bits   {rep.precision_bits}",
            f"x0 (flow)        {to_decimal(rep.x0, 50)}",
            f"x0 (series)      {to_decimal(rep.x0_alt, 50) if rep.x0_alt is not None else '-'}",
            f"exp(-x0)         {to_decimal(gmpy2.exp(-rep.x0), 50)}",
            f"F0(x0)           {to_decimal(rep.F0_at_x0, 40)}",
            f"F0'(x0)          {to_decimal(rep.F0prime_at_x0, 40)}",
            f"b2               {to_decimal(rep.b[0], 40)}",
            f"c'_1             {to_decimal(rep.cprime[1], 40)}",
            f"g'_-2            {to_decimal(rep.gprime[0], 40)}",
            "",
            "genus 0:  n_{0,d} e^{d x0} ~ sum_k a0_k d^(-k-1/2)",
        ]
        lines += [f"  a0_{k:<3d} {to_decimal(v, 40)}" for k, v in sorted(rep.a0.items())]
        lines += ["", "genus 1:  n_{1,d} e^{d x0} ~ 1/(48 d) + sum_k a1_k d^(-k-3/2)"]
        lines += [f"  a1_{k:<3d} {to_decimal(v, 40)}" for k, v in sorted(rep.a1.items())]
    lines += ["", "singularity checks:"]
    lines += [f"  {'PASS' if c['pass'] else 'FAIL'}  {name}" for name, c in rep.checks.items()]
    if validation is not None:
        lines += ["", "asymptotic validation:"]
        for name, c in validation["checks"].items():
            extra = ""
            if "slope" in c:
                extra = f"  slope {c['slope']:.4f} (expected {c['expected']})"
            elif "max_deviation" in c:
                extra = f"  max |ratio - 1| = {c['max_deviation']:.3e}"
            lines.append(f"  {'PASS' if c['pass'] else 'FAIL'}  {name}{extra}")
    return "\n".join(lines) + "\n"
