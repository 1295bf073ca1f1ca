"""Command-line entry point: ``renvnet <command> <spec.json> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings

import numpy as np

from .capacity import StationaryFamily, modified_network
from .environment import CoupledNetwork, coupled_box, solve_theta, verify_coupled_balance
from .errors import AllBlockedWarning, RenvnetError, ValidationError
from .jackson import box_states, jackson_generator, product_form, solve_traffic, verify_global_balance
from .simulate import empirical_compare, occupation_measure, simulate_ctmc
from .spec_io import SpecDocument, dump_report, parse_spec

COMMANDS = ("analyze", "modify", "env", "simulate", "verify")


class ThresholdExceeded(RenvnetError):
    code = "threshold_exceeded"


def _fmt(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def _table(title, headers, rows) -> str:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = [title, "  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def _matrix_rows(M, labels=None):
    M = np.asarray(M)
    labels = labels or [str(i) for i in range(M.shape[0])]
    return [[labels[i], *(float(x) for x in M[i])] for i in range(M.shape[0])]


def _traffic_residual(spec, eta) -> float:
    return float(np.max(np.abs(eta @ spec.routing - eta)))


def cmd_analyze(doc: SpecDocument, args):
    spec = doc.network
    eta = solve_traffic(spec)
    xi = product_form(spec, eta)
    res = verify_global_balance(xi.pmf, jackson_generator(spec), box_states(spec.J, doc.box))
    report = {
        "eta": eta, "normalizers": xi.normalizers, "xi_zero": xi.pmf((0,) * spec.J),
        "marginals": [xi.marginal_vector(j, 5) for j in range(spec.J)],
        "traffic_residual": _traffic_residual(spec, eta), "balance_residual": res,
    }
    text = [
        _table("traffic and normalizers", ["node", "eta", "C"],
               [[j, float(eta[j]), float(xi.normalizers[j - 1]) if j else "-"] for j in range(spec.J + 1)]),
        f"xi(0) = {_fmt(report['xi_zero'])}",
        f"balance residual on box {{0..{doc.box}}}^{spec.J}: {res:.3e}",
    ]
    checks = {"balance": res <= args.tol_balance, "traffic": report["traffic_residual"] <= args.tol_solve}
    return report, text, checks


def _gamma(doc):
    return doc.gamma if doc.gamma is not None else np.ones(doc.network.J)


def cmd_modify(doc: SpecDocument, args):
    spec = doc.network
    gamma = _gamma(doc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AllBlockedWarning)
        mn = modified_network(spec, gamma, args.mode or doc.mode, doc.kernel)
    phi = doc.frozen_law if doc.frozen_law is not None else "marginal"
    fam = StationaryFamily(product_form(spec), mn.partition, phi)
    res = verify_global_balance(fam.pmf, mn.generator, box_states(spec.J, doc.box))
    report = {
        "mode": mn.chain.mode, "gamma": gamma, "alpha": mn.controls.alpha, "beta": mn.controls.beta,
        "modified_routing": mn.kernel, "blocked": list(mn.partition.blocked),
        "effective_arrival_rate": mn.effective_arrival_rate, "balance_residual": res,
    }
    text = [
        f"mode: {mn.chain.mode}",
        "alpha = (" + ", ".join(_fmt(float(a)) for a in mn.controls.alpha) + f"), beta = {_fmt(mn.controls.beta)}",
        _table("modified routing", ["row", *map(str, range(spec.J + 1))], _matrix_rows(mn.kernel)),
        f"blocked nodes: {list(mn.partition.blocked) or 'none'}",
        f"effective arrival rate: {_fmt(mn.effective_arrival_rate)}",
        f"balance residual on box {{0..{doc.box}}}^{spec.J}: {res:.3e}",
    ]
    return report, text, {"balance": res <= args.tol_balance}


def _env(doc, args):
    env = doc.environment
    if env is None:
        raise ValidationError("spec has no environment section")
    if args.mode and args.mode != env.mode:
        env = dataclasses.replace(env, mode=args.mode)
    return CoupledNetwork(doc.network, env)


def cmd_env(doc: SpecDocument, args):
    net = _env(doc, args)
    Q = net.reduced_generator()
    theta = solve_theta(Q)
    theta_res = float(np.max(np.abs(theta @ Q)))
    res = _coupled_residual(net, theta, doc.env_box)
    report = {"labels": list(net.env.labels), "reduced_generator": Q, "theta": theta,
              "theta_residual": theta_res, "coupled_residual": res}
    labels = list(net.env.labels)
    text = [
        _table("reduced generator", ["from", *labels], _matrix_rows(Q, labels)),
        _table("environment factor", ["status", "theta"], [[labels[k], float(theta[k])] for k in range(net.K)]),
        f"coupled balance residual on box {{0..{doc.env_box}}}^{doc.network.J} x K: {res:.3e}",
    ]
    return report, text, {"coupled_balance": res <= args.tol_balance, "theta": theta_res <= args.tol_solve}


def _coupled_residual(net, theta, bound):
    return verify_coupled_balance(net.spec, net.env, theta, coupled_box(net.spec.J, bound, net.K), network=net)


def cmd_simulate(doc: SpecDocument, args):
    spec = doc.network
    xi = product_form(spec)
    events = args.events or doc.events
    seed = doc.seed if args.seed is None else args.seed
    B = doc.bound
    if doc.environment is not None:
        net = _env(doc, args)
        theta = solve_theta(net.reduced_generator())
        traj = simulate_ctmc(net.generator, ((0,) * spec.J, 0), events=events, seed=seed)
        occ = occupation_measure(traj, key=lambda s: (s[0][0], s[1]))
        support = [(n, k) for n in range(B + 1) for k in range(net.K)]
        tv = {"node1_x_status": empirical_compare(occ, lambda s: xi.marginal(0, s[0]) * theta[s[1]], support)}
        marg = lambda j: occupation_measure(traj, key=lambda s: s[0][j])  # noqa: E731
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AllBlockedWarning)
            mn = modified_network(spec, _gamma(doc), args.mode or doc.mode, doc.kernel)
        traj = simulate_ctmc(mn.generator, (0,) * spec.J, events=events, seed=seed)
        tv = {}
        marg = lambda j: occupation_measure(traj, key=lambda s: s[j])  # noqa: E731
    blocked = set()
    if doc.gamma is not None and doc.environment is None:
        blocked = {j for j in range(spec.J) if doc.gamma[j] == 0}
    for j in range(spec.J):
        if j not in blocked:
            tv[f"node{j + 1}"] = empirical_compare(marg(j), lambda n, j=j: xi.marginal(j, n), range(B + 1))
    report = {"events": traj.n_events, "seed": seed, "simulated_time": traj.horizon, "tv": tv}
    text = [f"{traj.n_events} events, seed {seed}, simulated time {traj.horizon:.6g}",
            _table("total variation to analytic law", ["quantity", "tv"], [[k, v] for k, v in tv.items()])]
    return report, text, {"tv": max(tv.values()) <= args.tol_tv}


def cmd_verify(doc: SpecDocument, args):
    report, text, checks = {}, [], {}
    suites = [("analyze", cmd_analyze), ("modify", cmd_modify)]
    if doc.environment is not None:
        suites.append(("env", cmd_env))
    for name, fn in suites:
        r, t, c = fn(doc, args)
        report[name] = r
        text += t
        checks.update({f"{name}.{k}": v for k, v in c.items()})
    text.append(_table("checks", ["check", "result"], [[k, "pass" if v else "FAIL"] for k, v in checks.items()]))
    return report, text, checks


HANDLERS = {"analyze": cmd_analyze, "modify": cmd_modify, "env": cmd_env,
            "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renvnet", description="Randomized rerouting for Jackson networks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("spec", help="spec file, or the name of a bundled spec")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--seed", type=int)
    p.add_argument("--events", type=int)
    p.add_argument("--tol-balance", type=float, default=1e-8)
    p.add_argument("--tol-solve", type=float, default=1e-10)
    p.add_argument("--tol-tv", type=float, default=0.03)
    p.add_argument("--mode", choices=("skipping", "reflection", "user_supplied"))
    return p


def run(command: str, doc: SpecDocument, args) -> tuple:
    """Run a command; returns ``(report, text_lines, exit_code)``."""
    report, text, checks = HANDLERS[command](doc, args)
    checks = {k: bool(v) for k, v in checks.items()}
    report = {"command": command, "spec": doc.name, **report,
              "checks": checks, "passed": all(checks.values())}
    return report, text, 0 if report["passed"] else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = parse_spec(args.spec)
        report, text, code = run(args.command, doc, args)
    except (RenvnetError, FileNotFoundError) as exc:
        err = exc.to_dict() if isinstance(exc, RenvnetError) else {
            "type": type(exc).__name__, "code": "file_not_found", "message": str(exc)}
        print(json.dumps({"error": err}), file=sys.stderr)
        return 2
    print("\n\n".join(text))
    if args.out:
        dump_report(report, args.out)
    if code:
        failed = [k for k, v in report["checks"].items() if not v]
        print(json.dumps({"error": ThresholdExceeded(f"checks failed: {failed}").to_dict()}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
