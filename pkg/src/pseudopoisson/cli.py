"""Command-line interface: ``pseudopoisson <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 estimation failure
(only with ``--strict``).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Sequence

import numpy as np

from . import __version__
from .data import (
    FAMILIES,
    BivariateSample,
    FitResult,
    ModelSpec,
    all_specs,
    dispersion_index,
    make_params,
    pearson_correlation,
    read_csv,
    sample_moments,
    write_csv,
)
from .errors import DataError, EstimationError, PseudoPoissonError, UndefinedStatisticError, UsageError
from .inference import lrt, rho_bounds
from .mle import INAPPLICABLE_NOTE, MleOptions, fit_family, loglik
from .mme import mme_fit
from .moments import model_moments, pmf_grid
from .simulation import StudyConfig, run_study, sample_from

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 2, 3, 4

_ZERO = 1e-4


# ---------------------------------------------------------------------------
# formatting


def fmt(value, boundary: bool = False, digits: int = 3) -> str:
    """Table rendering: '-' for missing, '≈0' for tiny, '≈∞' for capped values."""
    if value is None:
        return "-"
    if isinstance(value, float) and math.isnan(value):
        return "-"
    if boundary:
        return "≈∞"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if abs(value) < _ZERO:
        return "≈0"
    return f"{value:.{digits}f}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(args, doc: dict, text: str) -> None:
    payload = json.dumps(_jsonable(doc), indent=2) if args.json else text
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        sys.stdout.write(payload + "\n")


def _meta(args, command: str) -> dict:
    return {"command": command, "version": __version__, "seed": getattr(args, "seed", None),
            "argv": list(getattr(args, "argv", []))}


# ---------------------------------------------------------------------------
# argument helpers


def _spec(args) -> ModelSpec:
    if not args.model:
        raise UsageError("--model is required")
    sel = args.model
    sign = args.sign
    # allow selectors such as exp:c1- directly
    if sel and sel[-1] in "+-" and sign is None:
        sel, sign = sel[:-1], sel[-1]
    spec = ModelSpec.parse(sel, sign)
    return spec


def _params(args, spec: ModelSpec):
    if getattr(args, "fit", None):
        fit = _load_fit(args.fit)
        return fit.params
    if not args.params:
        raise UsageError("--params (or --fit) is required")
    vals = {}
    for item in args.params.split(","):
        try:
            k, v = item.split("=")
            vals[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"bad parameter {item!r}; expected name=value") from None
    for k, v in spec.fixed.items():
        vals.setdefault(k, v)
    return make_params(spec.family, vals)


def _load_sample(args) -> BivariateSample:
    if not args.data:
        raise UsageError("--data is required")
    return read_csv(args.data, mirror=args.mirror)


def _load_fit(path: str, model: str | None = None) -> FitResult:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read fit {path}: {exc}") from exc
    if "spec" in doc:
        return FitResult.from_dict(doc)
    fits = [FitResult.from_dict(f) for m in doc.get("models", []) for f in (m.get("mle"),) if f]
    if model:
        fits = [f for f in fits if str(f.spec) == model]
    if len(fits) != 1:
        raise UsageError(f"{path}: expected exactly one MLE fit, found {len(fits)} (use --model)")
    return fits[0]


# ---------------------------------------------------------------------------
# fit


def _sample_summary(sample: BivariateSample) -> dict:
    m = sample_moments(sample)
    out: dict[str, Any] = {"n": sample.n, "M1": m.M1, "M2": m.M2, "S12": m.S12, "S22": m.S22,
                           "digest": sample.digest}
    for key, fn in (("dispersion_x1", lambda: dispersion_index(sample.x1)),
                    ("dispersion_x2", lambda: dispersion_index(sample.x2)),
                    ("pearson", lambda: pearson_correlation(sample))):
        try:
            out[key] = fn()
        except UndefinedStatisticError:
            out[key] = None
    out["zero_x1_positive_x2"] = sample.has_zero_x1_positive_x2
    return out


def _mle_root_chooser(spec: ModelSpec, sample: BivariateSample):
    def choose(cands):
        best, best_ll = 0, -math.inf
        for i, c in enumerate(cands):
            try:
                ll = loglik(make_params(spec.family, c), sample)
            except ValueError:
                ll = -math.inf
            if ll > best_ll:
                best, best_ll = i, ll
        return best
    return choose


def _fit_models(sample: BivariateSample, specs: Sequence[ModelSpec], method: str,
                opts: MleOptions) -> list[dict]:
    want_mme = method in ("mme", "both")
    want_mle = method in ("mle", "both")
    mle_fits: dict[ModelSpec, FitResult] = {}
    errors: dict[ModelSpec, str] = {}
    if want_mle:
        by_family = {fam: [s for s in specs if s.family == fam] for fam in FAMILIES}
        by_family = {f: s for f, s in by_family.items() if s}

        def run(fam):
            return fit_family(sample, fam, opts, by_family[fam])

        with ThreadPoolExecutor(max(len(by_family), 1)) as pool:
            for res in pool.map(run, list(by_family)):
                mle_fits.update(res)
        for s, f in mle_fits.items():
            if f.applicable and not f.converged:
                errors[s] = "MLE did not converge"
    rows = []
    for spec in specs:
        row: dict[str, Any] = {"spec": spec}
        if want_mme:
            rep = mme_fit(spec, sample, choose=_mle_root_chooser(spec, sample))
            row["mme"] = rep.to_fit(sample)
            if rep.error is not None and spec.selector != "lomax:full":
                row["mme_error"] = str(rep.error)
        if want_mle:
            row["mle"] = mle_fits[spec]
            if spec in errors:
                row["mle_error"] = errors[spec]
        rows.append(row)
    return rows


def _attach_lrts(rows: list[dict], sample: BivariateSample, level: float) -> None:
    fulls = {r["spec"].family: r["mle"] for r in rows
             if r["spec"].case == "full" and r.get("mle") is not None}
    for r in rows:
        spec, fit = r["spec"], r.get("mle")
        full = fulls.get(spec.family)
        if (fit is None or full is None or spec.case == "full" or not full.applicable
                or not fit.applicable):
            continue
        try:
            r["lrt"] = lrt(full, fit, level, sample)
        except UsageError:
            pass


def _best(rows: list[dict], family: str | None = None) -> str | None:
    cands = [(r["mle"].aic, str(r["spec"])) for r in rows
             if r.get("mle") is not None and r["mle"].aic is not None and math.isfinite(r["mle"].aic)
             and (family is None or r["spec"].family == family)]
    return min(cands)[1] if cands else None


def _render_fit(doc: dict, rows: list[dict]) -> str:
    s = doc["sample"]
    lines = [
        f"n = {s['n']}   M1 = {s['M1']:.4f}   M2 = {s['M2']:.4f}   S12 = {s['S12']:.4f}   S22 = {s['S22']:.4f}",
        f"dispersion index x1 = {fmt(s['dispersion_x1'])}   x2 = {fmt(s['dispersion_x2'])}"
        f"   pearson = {fmt(s['pearson'])}",
        "",
        f"{'Model':<34}{'Param':<8}{'m.m.e':>10}{'m.l.e':>12}{'-2logΛ':>10}{'AIC':>12}",
    ]
    best = set(doc["best"].values())
    for r in rows:
        spec = r["spec"]
        mme, mle = r.get("mme"), r.get("mle")
        stat = r.get("lrt")
        boundary = set(mle.diagnostics.get("boundary", [])) if mle is not None else set()
        free = [k for k in spec.names if k not in spec.fixed]
        label = spec.label + (" *" if str(spec) in best else "")
        for i, k in enumerate(free):
            mm = None if mme is None else mme.estimates.get(k)
            ml = None if mle is None or not mle.applicable else mle.estimates.get(k)
            capped = any(b.startswith(f"{k}->inf") for b in boundary)
            if any(b.startswith(f"{k}->0") for b in boundary):
                ml = 0.0
            lab = label if i == 0 else ""
            lrt_s = fmt(stat.stat) if (stat is not None and i == 0) else ("-" if i == 0 else "")
            aic_s = ""
            if i == 0:
                aic_s = fmt(mle.aic) if mle is not None and mle.applicable else "-"
            lines.append(f"{lab:<34}{k:<8}{fmt(mm):>10}{fmt(ml, capped):>12}{lrt_s:>10}{aic_s:>12}")
        notes = []
        if mle is not None and not mle.applicable:
            notes.append(INAPPLICABLE_NOTE)
        if r.get("mme_error"):
            notes.append(f"m.m.e: {r['mme_error']}")
        if mme is not None and mme.note:
            notes.append(f"m.m.e: {mme.note}")
        if mme is not None and mme.diagnostics.get("admissible") is False:
            notes.append("m.m.e lies outside the admissible parameter region")
        if r.get("mle_error"):
            notes.append(r["mle_error"])
        if stat is not None:
            verdict = "reject" if stat.reject else "retain"
            notes.append(f"LRT df={stat.df} crit={stat.critical:.3f} p={stat.p_value:.4g} -> {verdict}")
            if stat.note:
                notes.append(stat.note)
        if mle is not None and mle.rho is not None:
            tag = " (series-evaluated)" if spec.selector == "lomax:full" else ""
            notes.append(f"rho = {mle.rho:.4f}{tag}")
        for note in notes:
            lines.append(f"{'':<4}- {note}")
    lines.append("")
    for fam, name in doc["best"].items():
        lines.append(f"best by AIC ({fam}): {name}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    sample = _load_sample(args)
    if args.all:
        specs = all_specs()
    else:
        spec = _spec(args)
        specs = [spec]
        if args.method in ("mle", "both") and spec.case != "full":
            specs = [ModelSpec(spec.family), spec]  # full model needed for the LRT
    opts = MleOptions(compute_se=args.se)
    rows = _fit_models(sample, specs, args.method, opts)
    if args.method in ("mle", "both"):
        _attach_lrts(rows, sample, args.level)
    if not args.all:
        target = specs[-1]
        rows = [r for r in rows if r["spec"] == target] + [r for r in rows if r["spec"] != target]
        rows = rows[:1] if len(specs) == 1 else rows
    best = {}
    for fam in FAMILIES:
        b = _best(rows, fam)
        if b:
            best[fam] = b
    overall = _best(rows)
    if overall and len(best) > 1:
        best["overall"] = overall
    doc = {
        "meta": _meta(args, "fit"),
        "sample": _sample_summary(sample),
        "mirror": args.mirror,
        "models": [
            {
                "model": str(r["spec"]),
                "label": r["spec"].label,
                "mme": None if r.get("mme") is None else r["mme"].to_dict(),
                "mle": None if r.get("mle") is None else r["mle"].to_dict(),
                "lrt": None if r.get("lrt") is None else r["lrt"].as_dict(),
                "rho_bounds": rho_bounds(r["spec"]).as_dict(),
                "notes": [x for x in (r.get("mme_error"), r.get("mle_error")) if x]
                + ([INAPPLICABLE_NOTE] if r.get("mle") is not None and not r["mle"].applicable else []),
            }
            for r in rows
        ],
        "best": best,
    }
    if not any((r.get("mle") and r["mle"].applicable) or (r.get("mme") and r["mme"].diagnostics.get("converged"))
               for r in rows):
        doc["notes"] = ["no applicable model for this sample"]
    _emit(args, doc, _render_fit(doc, rows))
    failed = any(r.get("mme_error") or r.get("mle_error") or (r.get("mle") is not None and not r["mle"].applicable)
                 for r in rows)
    return EXIT_ESTIMATION if (args.strict and failed) else EXIT_OK


# ---------------------------------------------------------------------------
# other commands


def cmd_lrt(args) -> int:
    full = _load_fit(args.full, args.full_model)
    sub = _load_fit(args.sub, args.sub_model)
    sample = _load_sample(args) if args.data else None
    res = lrt(full, sub, args.level, sample)
    doc = {"meta": _meta(args, "lrt"), **res.as_dict()}
    text = (f"{sub.spec.label} vs {full.spec.label}\n"
            f"-2 log Lambda = {res.stat:.3f}   df = {res.df}   critical({args.level}) = {res.critical:.3f}"
            f"   p = {res.p_value:.4g}\n"
            f"{'reject' if res.reject else 'do not reject'} the sub-model")
    if res.closed_form_stat is not None:
        text += f"\nclosed-form check: {res.closed_form_stat:.6f}"
    if res.note:
        text += f"\nnote: {res.note}"
    _emit(args, doc, text)
    return EXIT_OK


def cmd_bounds(args) -> int:
    specs = [_spec(args)] if args.model else all_specs()
    rows = [(s, rho_bounds(s)) for s in specs]
    doc = {"meta": _meta(args, "bounds"),
           "bounds": [{"model": str(s), "label": s.label, **b.as_dict()} for s, b in rows]}
    lines = [f"{'Model':<34}{'lower':>10}{'upper':>10}  attained"]
    for s, b in rows:
        lines.append(f"{s.label:<34}{b.lower:>10.6f}{b.upper:>10.6f}  {b.attained_at}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _spec(args)
    truth = _params(args, spec)
    sample = sample_from(spec, truth, args.n, 0 if args.seed is None else args.seed)
    if args.out and not args.json:
        write_csv(sample, args.out)
        return EXIT_OK
    if args.json:
        _emit(args, {"meta": _meta(args, "simulate"), "x1": sample.x1.tolist(), "x2": sample.x2.tolist()}, "")
        return EXIT_OK
    sys.stdout.write("x1,x2\n" + "".join(f"{a},{b}\n" for a, b in sample.pairs))
    return EXIT_OK


def cmd_study(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg_doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {args.config}: {exc}") from exc
    if args.seed is not None:
        cfg_doc["seed"] = args.seed
    cfg = StudyConfig.from_dict(cfg_doc)
    summary = run_study(cfg)
    doc = {"meta": _meta(args, "study"), **summary.as_dict()}
    lines = [f"{cfg.spec.label}, n = {cfg.n}, reps = {cfg.reps}, seed = {cfg.seed}",
             f"{'param':<8}{'truth':>10}" + "".join(f"{e + ' mean':>12}{'SE(' + e + ')':>12}" for e in summary.estimates)]
    for k in cfg.spec.free:
        line = f"{k:<8}{getattr(cfg.truth, k):>10.3f}"
        for e, block in summary.estimates.items():
            ps = block.get(k)
            line += f"{fmt(ps.mean) if ps else '-':>12}{fmt(ps.se) if ps else '-':>12}"
        lines.append(line)
    lines.append(f"mean pearson correlation = {summary.mean_rho:.4f}")
    lines.append("failures: " + ", ".join(f"{k}={v}" for k, v in summary.failures.items()))
    for f in summary.flags:
        lines.append(f"note: {f}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def cmd_curve(args) -> int:
    spec = _spec(args)
    p = _params(args, spec)
    xs = np.arange(args.x1_max + 1)
    rates = np.atleast_1d(p.rate(xs.astype(np.float64)))
    rows = [{"x1": int(x), "rate": float(r)} for x, r in zip(xs, rates)]
    if args.data:
        sample = _load_sample(args)
        for row in rows:
            mask = sample.x1 == row["x1"]
            row["freq"] = float(mask.mean())
            row["mean_x2"] = float(sample.x2[mask].mean()) if mask.any() else None
    doc = {"meta": _meta(args, "curve"), "model": str(spec), "params": p.as_dict(), "rows": rows}
    cols = list(rows[0])
    text = ",".join(cols) + "\n" + "\n".join(
        ",".join("" if r[c] is None else (f"{r[c]:.10g}" if isinstance(r[c], float) else str(r[c])) for c in cols)
        for r in rows)
    _emit(args, doc, text)
    return EXIT_OK


def cmd_pmf(args) -> int:
    spec = _spec(args)
    p = _params(args, spec)
    P = pmf_grid(p, args.x1_max, args.x2_max)
    doc = {"meta": _meta(args, "pmf"), "model": str(spec), "params": p.as_dict(),
           "x1_max": args.x1_max, "x2_max": args.x2_max, "pmf": P.tolist(), "total": float(P.sum())}
    header = "x1," + ",".join(f"x2={j}" for j in range(args.x2_max + 1))
    text = header + "\n" + "\n".join(f"{i}," + ",".join(f"{v:.6e}" for v in row) for i, row in enumerate(P))
    _emit(args, doc, text)
    return EXIT_OK


def cmd_moments(args) -> int:
    if args.data:
        sample = _load_sample(args)
        s = _sample_summary(sample)
        doc = {"meta": _meta(args, "moments"), "sample": s}
        text = "\n".join(f"{k:<22}{fmt(v, digits=6) if isinstance(v, float) else v}" for k, v in s.items())
    else:
        spec = _spec(args)
        p = _params(args, spec)
        ms = model_moments(p)
        doc = {"meta": _meta(args, "moments"), "model": str(spec), "params": p.as_dict(), **ms.as_dict()}
        if spec.selector == "lomax:full":
            doc["rho_note"] = "series-evaluated"
        text = "\n".join(f"{k:<6}{v:.10g}" for k, v in ms.as_dict().items())
    _emit(args, doc, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--out", help="write output to this path")
    common.add_argument("--seed", type=int, default=None, help="random seed (u64)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="family:case, e.g. exp:full, lomax:eta1, exp:c4")
    model.add_argument("--sign", choices=["+", "-"], help="sign of the fixed beta (cases c1, c4)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="CSV with integer columns x1,x2")
    data.add_argument("--mirror", action="store_true", help="swap the columns after loading")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--params", help="comma list, e.g. alpha=5,beta=-20,gamma=0.5,delta=25")
    params.add_argument("--fit", help="saved fit JSON to take parameters from")

    p = _Parser(prog="pseudopoisson", description="Bivariate pseudo-Poisson count models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", parents=[common, model, data], help="fit one or all models")
    f.add_argument("--method", choices=["mme", "mle", "both"], default="both")
    f.add_argument("--all", action="store_true", help="fit every sub-model of both families")
    f.add_argument("--level", type=float, default=0.05)
    f.add_argument("--strict", action="store_true", help="exit 4 if any requested model fails")
    f.add_argument("--se", action="store_true", help="numerical-Hessian standard errors")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("lrt", parents=[common, data], help="likelihood-ratio test of saved fits")
    t.add_argument("--full", required=True)
    t.add_argument("--sub", required=True)
    t.add_argument("--full-model", help="pick this model from a multi-model report")
    t.add_argument("--sub-model", help="pick this model from a multi-model report")
    t.add_argument("--level", type=float, default=0.05)
    t.set_defaults(func=cmd_lrt)

    b = sub.add_parser("bounds", parents=[common, model], help="attainable correlation bounds")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", parents=[common, model, params], help="draw a sample")
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("study", parents=[common], help="run a replication study")
    st.add_argument("--config", required=True)
    st.set_defaults(func=cmd_study)

    c = sub.add_parser("curve", parents=[common, model, params, data], help="regression curve grid")
    c.add_argument("--x1-max", type=int, default=10)
    c.set_defaults(func=cmd_curve)

    m = sub.add_parser("pmf", parents=[common, model, params], help="joint mass function grid")
    m.add_argument("--x1-max", type=int, default=10)
    m.add_argument("--x2-max", type=int, default=10)
    m.set_defaults(func=cmd_pmf)

    mo = sub.add_parser("moments", parents=[common, model, params, data],
                        help="population moments of a model, or sample moments of data")
    mo.set_defaults(func=cmd_moments)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except PseudoPoissonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:  # e.g. inadmissible --params
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
