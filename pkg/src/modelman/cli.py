"""Command-line entry point ``modelman``.

Numbers go to stdout (JSON or CSV) or to files; one-line summaries go to
stderr.  Exit status: 0 success, 1 a verification or numeric check
failed, 2 bad usage or configuration.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import construct, criteria, heat, profile, sde
from .errors import ModelmanError, NumericError, VerificationError
from .io import emit_series, to_jsonable, write_json

BUNDLES = ("theorem-main", "alpha-dichotomy", "remark2", "woymp", "explosion-vs-heat")


class UsageError(Exception):
    pass


def _say(msg):
    print(msg, file=sys.stderr)


def _positive(name, v, allow_zero=False):
    if v is None:
        return
    if not (v > 0 or (allow_zero and v == 0)) or not math.isfinite(v):
        raise UsageError(f"--{name} must be {'nonnegative' if allow_zero else 'positive'}, got {v}")


# --------------------------------------------------------------------------
# argument parsing


def _add_profile_args(p):
    p.add_argument("--profile", choices=["euclidean", "hyperbolic", "power_exp"], default="power_exp")
    p.add_argument("--profile-json", help="warping profile document (overrides --profile)")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", type=float, default=3.0)


def _build_parser():
    top = argparse.ArgumentParser(prog="modelman", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="group", required=True)

    def cmd(parent, name, help_):
        p = parent.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file whose keys mirror the long flags")
        p.add_argument("--dump-config", action="store_true",
                       help="print the effective configuration and exit")
        return p

    pg = sub.add_parser("profile").add_subparsers(dest="action", required=True)
    p = cmd(pg, "show", "print a profile and its jet at sample radii")
    _add_profile_args(p)
    p.add_argument("--r", type=float, nargs="*", default=[0.5, 1.0, 2.0])

    cg = sub.add_parser("criteria").add_subparsers(dest="action", required=True)
    p = cmd(cg, "run", "classify a volume-growth criterion")
    _add_profile_args(p)
    p.add_argument("--which", choices=["model", "grigoryan", "recurrence", "all"], default="model")
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--m-max", type=int, default=40)

    hg = sub.add_parser("heat").add_subparsers(dest="action", required=True)
    p = cmd(hg, "run", "radial heat flow with absorbing boundary")
    _add_profile_args(p)
    p.add_argument("--R", type=float, default=40.0)
    p.add_argument("--N", type=int, default=None, help="cells (default R/0.005)")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--center", type=float, default=2.0)
    p.add_argument("--width", type=float, default=0.1)
    p.add_argument("--scheme", choices=["theta", "trbdf2"], default="theta")
    p.add_argument("--theta", type=float, default=0.5, help="0.5 Crank-Nicolson, 1 implicit Euler")
    p.add_argument("--out", help="mass trace CSV (x=t, y=M)")

    sg = sub.add_parser("sde").add_subparsers(dest="action", required=True)
    p = cmd(sg, "run", "explosion probability of the radial diffusion")
    _add_profile_args(p)
    p.add_argument("--r0", type=float, default=2.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--R-cert", type=float, default=None)
    p.add_argument("--dt-max", type=float, default=1e-3)
    p.add_argument("--out", help="per-path CSV")

    kg = sub.add_parser("construct").add_subparsers(dest="action", required=True)
    for name, help_ in (("build", "build the balancing end"),
                        ("verify", "build, glue and verify the per-period bounds")):
        p = cmd(kg, name, help_)
        p.add_argument("--alpha", type=float, default=3.0)
        p.add_argument("--n", type=int, default=2)
        p.add_argument("--kmax", type=int, default=30)
        p.add_argument("--d0", type=float, default=1.0)
        p.add_argument("--out", help="output file (JSON for build, CSV for verify)")
        if name == "verify":
            p.add_argument("--control", action="store_true",
                           help="glue two incomplete ends instead (expected to fail)")

    p = cmd(sub, "reproduce", "run one of the fixed experiment bundles")
    p.add_argument("bundle", choices=BUNDLES)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--kmax", type=int, default=30)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--outdir", help="directory for CSV/JSON series")
    return top


def _find_subparser(parser, argv):
    """Return the leaf parser that ``argv`` selects (for config defaults)."""
    p = parser
    for tok in argv:
        actions = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions or tok not in actions[0].choices:
            break
        p = actions[0].choices[tok]
    return p


def parse_args(argv):
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}")
        leaf = _find_subparser(parser, argv)
        known = {a.dest for a in leaf._actions}
        unknown = set(k.replace("-", "_") for k in cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        # explicit flags win over the file
        leaf.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        ns = parser.parse_args(argv)
    return ns


def _config_of(ns):
    skip = {"group", "action", "config", "dump_config"}
    return {k: v for k, v in vars(ns).items() if k not in skip}


# --------------------------------------------------------------------------
# commands


def _profile_of(ns):
    if getattr(ns, "profile_json", None):
        with open(ns.profile_json) as fh:
            return profile.WarpingProfile.from_json(fh.read())
    return profile.make_named_profile(ns.profile, ns.n, ns.alpha if ns.profile == "power_exp" else None)


def _cmd_profile_show(ns):
    prof = _profile_of(ns)
    end = profile.end_from_warping(prof, ns.n)
    rows = []
    for r in ns.r:
        lf, L, q = prof.log_jet(r)
        rows.append({"r": r, "log_f": lf, "f'/f": L, "f''/f": q,
                     "log_S": end.log_S(r), "log_V": end.log_V(r)})
    write_json({"profile": prof.to_dict(), "samples": rows}, fh=sys.stdout)
    return 0


def _cmd_criteria_run(ns):
    _positive("r0", ns.r0)
    end = profile.end_from_warping(_profile_of(ns), ns.n)
    pol = criteria.ClassifierPolicy(m_max=ns.m_max, r0=ns.r0)
    which = ["model", "grigoryan", "recurrence"] if ns.which == "all" else [ns.which]
    fns = {"model": criteria.model_completeness, "grigoryan": criteria.grigoryan,
           "recurrence": criteria.recurrence}
    out = {w: fns[w](end, pol).to_dict() for w in which}
    write_json(out[which[0]] if len(which) == 1 else out, fh=sys.stdout)
    for w in which:
        _say(f"{w}: {out[w]['verdict']} (p_hat={out[w]['tail_exponent']:.4g})")
    return 0


def _cmd_heat_run(ns):
    for k in ("R", "T", "dt", "width"):
        _positive(k, getattr(ns, k))
    if not 0.5 <= ns.theta <= 1.0:
        raise UsageError(f"--theta must lie in [0.5, 1], got {ns.theta}")
    end = profile.end_from_warping(_profile_of(ns), ns.n)
    N = ns.N or max(64, int(round(ns.R / 0.005)))
    run = heat.solve_radial_heat(end, ns.R, N, ns.T, ns.dt,
                                 {"kind": "bump", "center": ns.center, "width": ns.width},
                                 scheme=ns.scheme, theta=ns.theta)
    if ns.out:
        emit_series("mass", zip(run.times, run.mass_trace), ns.out)
    summary = {"R": ns.R, "N": N, "T": ns.T, "dt": run.scheme["dt"], "scheme": run.scheme,
               "final_mass": run.final_mass, "deficit": 1.0 - run.final_mass}
    write_json(summary, fh=sys.stdout)
    _say(f"M(T) = {run.final_mass:.6g}")
    return 0


def _cmd_sde_run(ns):
    for k in ("r0", "T", "dt_max"):
        _positive(k, getattr(ns, k))
    if ns.paths < 100:
        raise UsageError("--paths must be at least 100")
    pol = sde.SdePolicy(dt_max=ns.dt_max, R_cert=ns.R_cert)
    est = sde.explosion_probability(_profile_of(ns), ns.n, ns.r0, ns.T, ns.paths,
                                    base_seed=ns.seed, workers=ns.workers, policy=pol)
    if ns.out:
        with open(ns.out, "w", newline="") as fh:
            est.paths_csv(fh)
    write_json(est.to_dict(), fh=sys.stdout)
    _say(f"p_hat = {est.p_hat:.4g} [{est.ci_low:.4g}, {est.ci_high:.4g}]"
         + ("" if est.reliable else " (unreliable: too many censored paths)"))
    return 0


def _two_ended_parts(alpha, n, kmax, d0=1.0):
    base = profile.end_from_warping(profile.make_named_profile("power_exp", n, alpha), n)
    F = construct.dominating_area_envelope(base, d0, r_hi=kmax + 4.0)
    end2, plan = construct.build_balancing_end(F, n, kmax)
    end1 = base.shifted(d0)
    return end1, end2, plan


def _cmd_construct_build(ns):
    _, _, plan = _two_ended_parts(ns.alpha, ns.n, ns.kmax, ns.d0)
    text = write_json(plan.to_dict(), fh=None if ns.out else sys.stdout)
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text + "\n")
    _say(f"balancing end built: k_max={plan.k_max}, bullets={list(plan.bullets)}")
    return 0


def _cmd_construct_verify(ns):
    end1, end2, _ = _two_ended_parts(ns.alpha, ns.n, ns.kmax, ns.d0)
    m = construct.glue_two_ends(end1, end1 if ns.control else end2)
    rep = construct.verify_counterexample(m, range(1, ns.kmax + 1))
    if ns.out:
        with open(ns.out, "w", newline="") as fh:
            rep.to_csv(fh)
    else:
        sys.stdout.write(rep.to_csv())
    _say(f"{sum(rep.passes)}/{len(rep.ks)} periods pass; sum A_k = {math.fsum(rep.A):.6g}")
    return 0 if rep.all_pass else 1


# --------------------------------------------------------------------------
# reproduction bundles


def _outpath(ns, name):
    return os.path.join(ns.outdir, name) if ns.outdir else None


def _bundle_two_ended(ns):
    end1, end2, plan = _two_ended_parts(ns.alpha, ns.n, ns.kmax)
    m = construct.glue_two_ends(end1, end2)
    rep = construct.verify_counterexample(m, range(1, ns.kmax + 1))
    glued = criteria.model_completeness(m)
    alone = criteria.model_completeness(end1)
    sys.stdout.write(rep.to_csv())
    if ns.outdir:
        emit_series("A_k", zip(rep.ks, rep.A), _outpath(ns, "A_k.csv"))
        emit_series("B_k", zip(rep.ks, rep.B), _outpath(ns, "B_k.csv"))
        write_json({"report": rep.to_dict(), "glued": glued.to_dict(), "end1": alone.to_dict(),
                    "balancing_end": plan.to_dict()}, _outpath(ns, "theorem-main.json"))
    ok = (rep.all_pass and math.fsum(rep.A) >= 2.0 / 11.0 * len(rep.ks)
          and glued.verdict is criteria.Verdict.DIVERGES
          and alone.verdict is criteria.Verdict.CONVERGES)
    _say(f"theorem-main: {sum(rep.passes)}/{len(rep.ks)} periods pass, sum A = "
         f"{math.fsum(rep.A):.6g}, glued {glued.verdict}, end1 {alone.verdict}")
    return ok


def _bundle_alpha_dichotomy(ns):
    rows, ok = [], True
    for n in (2, 3):
        for a in (1.5, 2.0, 2.5, 3.0):
            end = profile.end_from_warping(profile.make_named_profile("power_exp", n, a), n)
            mv = criteria.model_completeness(end)
            gv = criteria.grigoryan(end)
            want = criteria.Verdict.DIVERGES if a <= 2 else criteria.Verdict.CONVERGES
            ok &= mv.verdict is want and gv.verdict is want
            rows.append({"n": n, "alpha": a, "model": mv.verdict.value, "grigoryan": gv.verdict.value,
                         "p_hat": mv.tail_exponent})
    print("n,alpha,model,grigoryan,p_hat")
    for r in rows:
        print(f"{r['n']},{r['alpha']!r},{r['model']},{r['grigoryan']},{r['p_hat']!r}")
    if ns.outdir:
        write_json(rows, _outpath(ns, "alpha-dichotomy.json"))
    _say("alpha-dichotomy: " + ("all verdicts match alpha <= 2" if ok else "MISMATCH"))
    return ok


def _bundle_recurrent_pair(ns):
    e1, e2 = construct.build_recurrent_finite_ratio_pair()
    r1 = criteria.recurrence(e1, r0=1.25)
    r2 = criteria.recurrence(e2, r0=1.25)
    comb = criteria.model_completeness(construct.glue_two_ends(e1, e2), r0=4.0)
    at40 = [dict(r.partial_integrals).get(40.0) for r in (r1, r2)]
    ok = (r1.verdict is criteria.Verdict.DIVERGES and r2.verdict is criteria.Verdict.DIVERGES
          and all(v is not None and v >= 9 for v in at40)
          and comb.verdict is criteria.Verdict.CONVERGES
          and comb.extrapolated_tail <= 1 / (3 * comb.R_max) + 1e-6)
    out = {"recurrence_S1": r1.to_dict(), "recurrence_S2": r2.to_dict(),
           "combined_model": comb.to_dict(), "partial_at_40": at40}
    write_json(out, fh=sys.stdout)
    if ns.outdir:
        write_json(out, _outpath(ns, "remark2.json"))
        emit_series("recurrence_S1", r1.partial_integrals, _outpath(ns, "recurrence_S1.csv"))
        emit_series("recurrence_S2", r2.partial_integrals, _outpath(ns, "recurrence_S2.csv"))
    _say(f"remark2: S1 {r1.verdict}, S2 {r2.verdict}, combined {comb.verdict}")
    return ok


def _bundle_woymp(ns):
    prof = profile.make_named_profile("power_exp", 3, 3.0)
    u = construct.make_woymp_function(3.0, 0.5, 1.0)
    r = np.linspace(2.0, 10.0, 81)
    fd = profile.radial_laplacian(profile.RadialFunction(u.u), prof, 3, r)
    exact = construct.woymp_laplacian(3.0, 0.5, r)
    err = float(np.max(np.abs(fd / exact - 1)))
    rep = criteria.woymp_report(u, prof, 3, criteria.WoympProbe(r0=2.0, R_max=50.0))
    out = {"fd_max_rel_err": err, "report": rep.to_dict()}
    write_json(out, fh=sys.stdout)
    if ns.outdir:
        emit_series("delta_u", zip(r, exact), _outpath(ns, "delta_u.csv"))
    _say(f"woymp: violating={rep.violating}, finite-difference error {err:.2e}")
    return rep.violating and err <= 1e-6


def _bundle_explosion_vs_heat(ns):
    prof = profile.make_named_profile("power_exp", 2, 3.0)
    end = profile.end_from_warping(prof, 2)
    u0 = {"kind": "bump", "center": 2.0, "width": 0.1}
    deficits = heat.mass_deficit(end, 1.0, (20.0, 40.0), u0=u0)
    est = sde.explosion_probability(prof, 2, 2.0, 1.0, ns.paths, base_seed=ns.seed,
                                    workers=ns.workers, keep_paths=False)
    d = deficits.deficits[-1][1]
    half = 0.5 * (est.ci_high - est.ci_low)
    ok = abs(est.p_hat - d) <= half + 0.02 and est.p_hat > 0.01 and d > 0.01 and deficits.converged
    out = {"heat": deficits.to_dict(), "sde": est.to_dict(), "difference": est.p_hat - d,
           "allowed": half + 0.02}
    write_json(out, fh=sys.stdout)
    if ns.outdir:
        write_json(out, _outpath(ns, "explosion-vs-heat.json"))
    _say(f"explosion-vs-heat: p_hat={est.p_hat:.4g}, heat deficit={d:.6g}")
    return ok


def _cmd_reproduce(ns):
    fn = {
        "theorem-main": _bundle_two_ended,
        "alpha-dichotomy": _bundle_alpha_dichotomy,
        "remark2": _bundle_recurrent_pair,
        "woymp": _bundle_woymp,
        "explosion-vs-heat": _bundle_explosion_vs_heat,
    }[ns.bundle]
    return 0 if fn(ns) else 1


_DISPATCH = {
    ("profile", "show"): _cmd_profile_show,
    ("criteria", "run"): _cmd_criteria_run,
    ("heat", "run"): _cmd_heat_run,
    ("sde", "run"): _cmd_sde_run,
    ("construct", "build"): _cmd_construct_build,
    ("construct", "verify"): _cmd_construct_verify,
    ("reproduce", None): _cmd_reproduce,
}


def run_command(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except UsageError as exc:
        _say(f"modelman: {exc}")
        return 2
    if ns.dump_config:
        write_json(_config_of(ns), fh=sys.stdout)
        return 0
    fn = _DISPATCH[(ns.group, getattr(ns, "action", None))]
    try:
        return fn(ns)
    except UsageError as exc:
        _say(f"modelman: {exc}")
        return 2
    except (VerificationError, NumericError) as exc:
        _say(f"modelman: check failed: {exc}")
        return 1
    except (ModelmanError, OSError) as exc:
        _say(f"modelman: {exc}")
        return 2


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
