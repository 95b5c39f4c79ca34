"""Command-line surface: one binary, JSON/CSV outputs, reproducible runs.

Every stochastic subcommand requires an explicit --seed (no wall-clock
default), and every run writes a manifest (subcommand, parameters, seed,
version, wall time, sha256 of the primary output) next to the output file,
or to stderr when printing to stdout.  Identical argv and seed reproduce
the primary output byte for byte; the manifest timestamp is excluded from
that guarantee.
"""
from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .serialize import (
    dump_json,
    load_cube_function,
    load_cube_measure,
    load_ising,
    load_mixture,
    load_subgraph_model,
)


def _threads_option(threads: int | None) -> int:
    if threads is not None:
        return threads
    return int(os.environ.get("MFLD_THREADS", "1"))


def _emit(ctx_params: dict, subcommand: str, text: str, out: str | None,
          started: float) -> None:
    digest = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "subcommand": subcommand,
        "parameters": {k: v for k, v in sorted(ctx_params.items())
                       if not isinstance(v, (bytes,))},
        "seed": ctx_params.get("seed"),
        "version": __version__,
        "wall_time_s": round(time.time() - started, 3),
        "output_sha256": digest,
    }
    if out:
        Path(out).write_text(text)
        Path(str(out) + ".manifest.json").write_text(dump_json(manifest))
    else:
        sys.stdout.write(text)
        sys.stderr.write(dump_json(manifest))


@click.group()
@click.option("--threads", type=int, default=None,
              help="Worker threads (results do not depend on this). "
                   "Falls back to MFLD_THREADS.")
@click.pass_context
def main(ctx, threads):
    """Mean-field structure toolkit on the discrete cube."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = _threads_option(threads)


# ---------------------------------------------------------------------------
# complexity
# ---------------------------------------------------------------------------

@main.command()
@click.option("--model", type=click.Choice(["table", "ising", "subgraph"]),
              required=True)
@click.option("--file", "path", required=True, type=click.Path(exists=True))
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--subsample", type=int, default=None,
              help="Vertex subsample count (marks the result a lower estimate).")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def complexity(ctx, model, path, samples, seed, subsample, out):
    """Monte-Carlo gradient-complexity estimate plus analytic bounds."""
    started = time.time()
    from . import complexity as cx

    analytic = None
    if model == "table":
        f = load_cube_function(path)
    elif model == "ising":
        a, b = load_ising(path)
        f = cx.ising_table(a, b)
        analytic = cx.ising_complexity_bound(a, b)
    else:
        sg = load_subgraph_model(path)
        from .graphs import model_table

        f = model_table(sg)
        analytic = sum(abs(beta) * len(edges) * sg.num_vertices ** 1.5
                       for edges, beta in sg.terms)
    est = cx.complexity_of(f, samples, seed, vertex_subsample=subsample)
    payload = {"mean": est.mean, "std_error": est.std_error,
               "samples": est.samples, "lower_estimate": est.lower_estimate}
    if analytic is not None:
        payload["analytic_bound"] = analytic
    _emit(dict(ctx.params, **{"model": model, "file": path, "samples": samples,
                              "seed": seed}), "complexity",
          dump_json(payload), out, started)


# ---------------------------------------------------------------------------
# meanfield solve / phi
# ---------------------------------------------------------------------------

def _load_mf_target(model: str, path: str, num_vertices: int | None):
    if model == "table":
        return load_cube_function(path)
    if model == "ising":
        from .complexity import ising_table

        a, b = load_ising(path)
        return ising_table(a, b)
    if model == "subgraph":
        return load_subgraph_model(path)
    if model == "triangle":
        from .graphs import triangle_model

        if num_vertices is None:
            raise click.UsageError("--N is required for the triangle model")
        return triangle_model(num_vertices)
    raise click.UsageError(f"unknown model {model}")


@main.group()
def meanfield():
    """Gibbs objective and rate function over product measures."""


@meanfield.command("solve")
@click.option("--model", type=click.Choice(["table", "ising", "subgraph", "triangle"]),
              required=True)
@click.option("--file", "path", type=click.Path(exists=True), default=None)
@click.option("--N", "num_vertices", type=int, default=None)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def meanfield_solve(ctx, model, path, num_vertices, p, restarts, seed, out):
    """Maximize E f - KL over products; report the best product found."""
    started = time.time()
    from .cube import CubeFunction
    from .meanfield import MeanFieldProblem, log_partition, solve_gibbs

    f = _load_mf_target(model, path, num_vertices)
    prob = MeanFieldProblem(f=f, p=p, restarts=restarts, seed=seed)
    res = solve_gibbs(prob)
    payload = {"objective": res.objective, "mean": res.mean,
               "converged": res.converged, "iterations": res.iterations,
               "restarts_used": res.restarts_used}
    if isinstance(f, CubeFunction):
        payload["log_partition"] = log_partition(f, p)
    _emit(dict(model=model, file=path, N=num_vertices, p=p,
               restarts=restarts, seed=seed), "meanfield solve",
          dump_json(payload), out, started)


def _parse_grid(spec: str) -> np.ndarray:
    start, step, stop = (float(tok) for tok in spec.split(":"))
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


@meanfield.command("phi")
@click.option("--model", type=click.Choice(["table", "ising", "subgraph", "triangle"]),
              required=True)
@click.option("--file", "path", type=click.Path(exists=True), default=None)
@click.option("--N", "num_vertices", type=int, default=None)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--t", "t_value", type=float, default=None)
@click.option("--t-grid", "t_grid", type=str, default=None,
              help="start:step:stop sweep; writes CSV rows (t, phi, ...).")
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def meanfield_phi(ctx, model, path, num_vertices, p, t_value, t_grid,
                  restarts, seed, out):
    """Rate function phi_p(t) at a point or along a grid."""
    started = time.time()
    from .meanfield import MeanFieldProblem, rate_function_phi

    f = _load_mf_target(model, path, num_vertices)
    prob = MeanFieldProblem(f=f, p=p, restarts=restarts, seed=seed)
    params = dict(model=model, file=path, N=num_vertices, p=p, t=t_value,
                  t_grid=t_grid, restarts=restarts, seed=seed)
    if (t_value is None) == (t_grid is None):
        raise click.UsageError("give exactly one of --t or --t-grid")
    if t_value is not None:
        res = rate_function_phi(prob, t_value)
        payload = {"phi": res.value, "lambda": res.multiplier,
                   "feasible": res.feasible, "converged": res.converged,
                   "boundary": res.boundary, "constraint_gap": res.constraint_gap,
                   "mean": res.mean}
        _emit(params, "meanfield phi", dump_json(payload), out, started)
        return
    lines = ["t,phi,lambda,feasible,converged"]
    for t in _parse_grid(t_grid):
        res = rate_function_phi(prob, float(t))
        lines.append(f"{t!r},{res.value!r},{res.multiplier!r},"
                     f"{int(res.feasible)},{int(res.converged)}")
    _emit(params, "meanfield phi", "\n".join(lines) + "\n", out, started)


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

@main.group()
def transport():
    """Exact W1 between cube measures."""


@transport.command("w1")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", type=click.Path(), default=None,
              help="Write the optimal plan as CSV (src, dst, mass, hamming).")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def transport_w1(ctx, path_a, path_b, plan_path, out):
    started = time.time()
    from .bits import hamming
    from .transport import w1_exact

    nu1 = load_cube_measure(path_a)
    nu2 = load_cube_measure(path_b)
    value, plan = w1_exact(nu1, nu2)
    if plan_path:
        rows = ["src,dst,mass,hamming"]
        for s, d, m in plan.pairs():
            rows.append(f"{s},{d},{m!r},{int(hamming(s, d))}")
        Path(plan_path).write_text("\n".join(rows) + "\n")
    payload = {"w1": value, "plan_rows": int(plan.mass.size)}
    _emit(dict(a=path_a, b=path_b, plan=plan_path), "transport w1",
          dump_json(payload), out, started)


# ---------------------------------------------------------------------------
# large deviations
# ---------------------------------------------------------------------------

@main.group()
def ld():
    """Tail bounds and exact tail oracles."""


@ld.command("bound")
@click.option("--phi", type=float, required=True,
              help="phi_p(t - delta), certified from below for soundness.")
@click.option("--phi-at-t", type=float, default=None,
              help="phi_p(t) for the lower bound (defaults to --phi).")
@click.option("--lip", type=float, required=True)
@click.option("--complexity", "dvalue", type=float, required=True)
@click.option("--n", type=int, required=True)
@click.option("--p", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def ld_bound(ctx, phi, phi_at_t, lip, dvalue, n, p, t, delta, out):
    started = time.time()
    from .ldbounds import report

    rep = report(t=t, delta=delta, p=p, n=n, lip=lip, d=dvalue,
                 phi_lower_arg=phi,
                 phi_at_t=phi if phi_at_t is None else phi_at_t)
    payload = {k: getattr(rep, k) for k in
               ("t", "delta", "p", "phi_lower_arg", "phi_at_t", "big_l",
                "upper_bound", "lower_bound", "vacuous_upper",
                "hypothesis_ok_lower")}
    _emit(dict(phi=phi, phi_at_t=phi_at_t, lip=lip, complexity=dvalue, n=n,
               p=p, t=t, delta=delta), "ld bound", dump_json(payload), out,
          started)


@ld.command("tail")
@click.option("--file", "path", required=True, type=click.Path(exists=True))
@click.option("--p", type=float, required=True)
@click.option("--t", type=float, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def ld_tail(ctx, path, p, t, out):
    started = time.time()
    from .ldbounds import exact_tail

    f = load_cube_function(path)
    val = exact_tail(f, p, t)
    payload = {"log_tail": (None if val == -np.inf else val),
               "empty_event": bool(val == -np.inf)}
    _emit(dict(file=path, p=p, t=t), "ld tail", dump_json(payload), out,
          started)


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------

@main.command()
@click.option("--measure", "path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, required=True)
@click.option("--alpha", type=float, default=2.0, show_default=True)
@click.option("--paths", "num_atoms", type=int, default=1000, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--trace-csv", type=click.Path(), default=None,
              help="Write one sample trajectory as CSV.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def localize(ctx, path, eps, alpha, num_atoms, dt, seed, trace_csv, out):
    """Decompose a measure into near-product tilts via stopped paths."""
    started = time.time()
    from .localization import SdeConfig, decompose, entropy_bookkeeping, simulate_path

    nu = load_cube_measure(path)
    cfg = SdeConfig(nu=nu, dt=dt, seed=seed, eps=eps, alpha=alpha)
    mixture = decompose(cfg, num_atoms)
    budget = entropy_bookkeeping(mixture, nu)
    if trace_csv:
        sp = simulate_path(cfg)
        rows = ["t," + ",".join(f"x{i}" for i in range(nu.n))]
        for t, state in zip(sp.times, sp.states):
            rows.append(f"{t!r}," + ",".join(repr(v) for v in state))
        Path(trace_csv).write_text("\n".join(rows) + "\n")
    payload = {
        "atoms": [{"theta": theta, "weight": w} for theta, w in mixture.atoms],
        "diagnostics": mixture.diagnostics,
        "entropy": {"kl_nu": budget.kl_nu,
                    "mixture_average_kl": budget.mixture_average_kl,
                    "allowed": budget.allowed},
    }
    _emit(dict(measure=path, eps=eps, alpha=alpha, paths=num_atoms, dt=dt,
               seed=seed), "localize", dump_json(payload), out, started)


# ---------------------------------------------------------------------------
# gaussian
# ---------------------------------------------------------------------------

@main.group()
def gaussian():
    """Gaussian-space checks over identity-covariance mixtures."""


@gaussian.command("lsi")
@click.option("--mixture", "path", required=True, type=click.Path(exists=True))
@click.option("--quad-points", type=int, default=80, show_default=True)
@click.option("--gw-samples", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def gaussian_lsi(ctx, path, quad_points, gw_samples, seed, out):
    started = time.time()
    from .gaussian import reverse_lsi_check

    rep = reverse_lsi_check(load_mixture(path), quad_points, gw_samples, seed)
    payload = {k: getattr(rep, k) for k in
               ("fisher", "kl", "gw", "gw_std_error", "m_term", "lhs", "rhs",
                "satisfied", "quad_converged")}
    _emit(dict(mixture=path, quad_points=quad_points, gw_samples=gw_samples,
               seed=seed), "gaussian lsi", dump_json(payload), out, started)


@gaussian.command("tilt")
@click.option("--mixture", "path", required=True, type=click.Path(exists=True))
@click.option("--radius", type=float, default=1.0, show_default=True)
@click.option("--grid", type=int, default=81, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def gaussian_tilt(ctx, path, radius, grid, seed, out):
    started = time.time()
    from .gaussian import gaussian_tilt_search

    rep = gaussian_tilt_search(load_mixture(path), radius, grid, seed=seed)
    payload = {"x0": rep.x0, "w2_squared": rep.w2_squared, "bound": rep.bound,
               "trace_dv": rep.trace_dv, "d_estimate": rep.d_estimate,
               "satisfied": rep.satisfied}
    _emit(dict(mixture=path, radius=radius, grid=grid, seed=seed),
          "gaussian tilt", dump_json(payload), out, started)


@gaussian.command("follmer")
@click.option("--mixture", "path", required=True, type=click.Path(exists=True))
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--paths", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def gaussian_follmer(ctx, path, dt, paths, seed, out):
    started = time.time()
    from .gaussian import gaussian_follmer_simulate

    st = gaussian_follmer_simulate(load_mixture(path), dt, paths, seed)
    payload = {k: getattr(st, k) for k in
               ("mc_energy", "mc_energy_se", "kl_times_two",
                "representation_ok", "ks_statistics", "h_trace_times",
                "h_trace_values", "h_trace_mc", "h_trace_bounds",
                "h_trace_ok")}
    _emit(dict(mixture=path, dt=dt, paths=paths, seed=seed),
          "gaussian follmer", dump_json(payload), out, started)


# ---------------------------------------------------------------------------
# exponential random graphs
# ---------------------------------------------------------------------------

@main.group()
def ergm():
    """Exponential random graph decomposition."""


@ergm.command("decompose")
@click.option("--model", "path", required=True, type=click.Path(exists=True))
@click.option("--eps", type=float, required=True)
@click.option("--paths", "num_atoms", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def ergm_decompose_cmd(ctx, path, eps, num_atoms, seed, out):
    started = time.time()
    from .graphs import ergm_decompose

    model = load_subgraph_model(path)
    mixture, rep = ergm_decompose(model, eps, num_atoms, seed)
    payload = {
        "atoms": [{"theta": theta, "weight": w} for theta, w in mixture.atoms],
        "diagnostics": mixture.diagnostics,
        "hamming": {"mean": rep.mean_hamming, "std_error": rep.std_error,
                    "theorem_bound": rep.theorem_bound},
        "entropy": {"graph": rep.entropy_graph,
                    "mixture_edges": rep.mixture_edge_entropy,
                    "allowed_slack": rep.entropy_slack_allowed,
                    "ok": rep.entropy_ok},
    }
    _emit(dict(model=path, eps=eps, paths=num_atoms, seed=seed),
          "ergm decompose", dump_json(payload), out, started)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

@main.command()
@click.argument("scope", default="all")
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def verify(ctx, scope, seed, out):
    """Run the invariant suite (SCOPE: all or a module name); exit 1 on any
    violation."""
    started = time.time()
    from .verify import run_checks

    results = run_checks(scope, seed)
    payload = {"checks": [{"name": name, "passed": ok, "detail": detail}
                          for name, ok, detail in results],
               "failures": sum(1 for _, ok, _ in results if not ok)}
    for name, ok, detail in results:
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}", err=True)
    _emit(dict(scope=scope, seed=seed), "verify", dump_json(payload), out,
          started)
    if payload["failures"]:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
