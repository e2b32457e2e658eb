"""Scenario runner: seeded, reproducible experiments with JSON reports.

Usage: uhlmann-lab <scenario> [flags] [inputs...]

Scenarios: uhlmann, szk, qip, amplify, commit, channel, compress,
blackhole, interfere, entropy. Reports go to stdout as a single JSON
document (byte-identical for identical config and seed); a human summary
and wall-clock time go to stderr. Exit codes: 0 all asserted bounds pass,
1 an assertion failed, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .errors import DimensionCapError, UhlmannLabError
from .qcore import linalg
from .qcore.channels import ChannelDesc, channel_from_circuit, encode_matrix
from .qcore.gates import GateCircuit, random_circuit
from .qcore.metrics import fidelity, trace_distance
from .qcore.states import DensityOp, maximally_mixed
from .qcore.random_ops import haar_state_vector, random_clifford
from .rng import Seed, as_seed
from . import crypto, physics, protocols, shannon, uhlmann


def _check(name: str, measured: float, bound: float, formula: str,
           direction: str = "<=") -> dict:
    ok = measured <= bound if direction == "<=" else measured >= bound
    return {"name": name, "bound_formula": formula, "bound": float(bound),
            "measured": float(measured), "direction": direction, "pass": bool(ok)}


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}")
    except OSError as exc:
        raise UsageError(f"{path}: {exc}")


class UsageError(Exception):
    pass


CONFIG_KEYS = {"instance", "m", "k", "T", "trials", "prover", "mode", "seed",
               "nu", "prep_error", "delta", "epsilon"}


def _absorb_config(args) -> None:
    """An input file may be an experiment config rather than an instance.

    Config JSON carries {instance path or inline dict, m, k, T, trials,
    prover, mode, seed, ...}; explicit command-line flags win over it.
    """
    if not args.inputs:
        return
    data = _load_json(args.inputs[0])
    if not (CONFIG_KEYS & set(data)) or "raw" in data or "C" in data:
        return
    args.inputs = args.inputs[1:]
    inst = data.pop("instance", None)
    if inst is not None:
        if isinstance(inst, str):
            args.instance = uhlmann.UhlmannInstance.from_json_dict(_load_json(inst))
        else:
            args.instance = uhlmann.UhlmannInstance.from_json_dict(inst)
    if "seed" in data and "--seed" not in args.raw_argv:
        args.seed = Seed(int(data.pop("seed")))
    if "trials" in data and "--trials" not in args.raw_argv:
        args.trials = int(data.pop("trials"))
    for key, value in data.items():
        args.params.setdefault(key, str(value))


def _load_instance(args) -> uhlmann.UhlmannInstance:
    if getattr(args, "instance", None) is not None:
        return args.instance
    if args.inputs:
        return uhlmann.UhlmannInstance.from_json_dict(_load_json(args.inputs[0]))
    kappa = float(args.params.get("kappa", 1.0))
    overlap = args.params.get("overlap")
    if overlap is not None:
        return uhlmann.overlap_instance(kappa, float(overlap), args.seed)
    dA = int(args.params.get("dA", 2))
    dB = int(args.params.get("dB", 2))
    return uhlmann.instance_with_fidelity(kappa, dA, dB, args.seed)


def _write_transcript(args, records) -> None:
    if not args.transcript:
        return
    with open(args.transcript, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _state_from_spec(spec: str) -> DensityOp:
    if spec.startswith("mm:"):
        n = int(spec.split(":", 1)[1])
        return maximally_mixed((2,) * n)
    if spec.startswith("diag:"):
        probs = [float(p) for p in spec.split(":", 1)[1].split(",")]
        return DensityOp(np.diag(probs).astype(complex), (len(probs),))
    if spec.startswith("haar:"):
        d = int(spec.split(":", 1)[1])
        v = haar_state_vector(d, as_seed(0).generator())
        return DensityOp(np.outer(v, v.conj()), (d,))
    data = _load_json(spec)
    circ = GateCircuit.from_json_dict(data)
    vec = circ.state()
    return DensityOp(np.outer(vec, vec.conj()), (circ.dim,))


# ---------------------------------------------------------------------------
# Scenario implementations. Each returns (results dict, checks list).

def run_uhlmann(args):
    x = _load_instance(args)
    eta = float(args.params.get("eta", 0.0))
    info = uhlmann.validate_instance(x)
    w = uhlmann.canonical_uhlmann(x, eta)
    psi, phi = x.states()
    transported = uhlmann.apply_uhlmann(x, eta, psi)
    achieved = abs(np.vdot(phi.amplitudes, transported.amplitudes)) ** 2
    overlap = abs(np.vdot(phi.amplitudes,
                          (psi.as_matrix() @ w.matrix.T).reshape(-1))) ** 2
    results = {
        "kappa": info["kappa"], "dA": info["dA"], "dB": info["dB"], "eta": eta,
        "rank": w.rank(),
        "w_matrix": encode_matrix(w.matrix),
        "isometry_overlap": float(overlap),
        "completion_overlap": float(achieved),
    }
    checks = [
        _check("uhlmann_equality", abs(overlap - info["kappa"]),
               args.tol if eta == 0 else 2 * eta * info["dB"] + args.tol,
               "| |<phi|(id x W)|psi>|^2 - F(rho, sigma) | <= tol (eta = 0)"),
        _check("partial_isometry", float(np.linalg.norm(
            w.support_projector @ w.support_projector - w.support_projector,
            ord=np.inf)), 1e-9, "(W^dag W)^2 = W^dag W"),
    ]
    return results, checks


def run_entropy(args):
    spec = args.params.get("state") or (args.inputs[0] if args.inputs else "mm:3")
    rho = _state_from_spec(spec)
    eps = float(args.params.get("epsilon", 0.0))
    rep = shannon.entropies(rho, eps)
    d = rho.dim
    results = {"state": spec, "h_min": rep.h_min, "h_max": rep.h_max,
               "h2_lower": rep.h2_lower, "h_max_smoothed": rep.h_max_smoothed,
               "epsilon": eps}
    checks = [
        _check("entropy_order", rep.h_min, rep.h_max + args.tol,
               "h_min <= h_max"),
        _check("entropy_range", abs(rep.h_max), math.log2(d) + args.tol,
               "|h| <= log2(d)"),
    ]
    return results, checks


def run_szk(args):
    x = _load_instance(args)
    m = int(args.params.get("m", 8))
    info = uhlmann.validate_instance(x)
    prover_name = args.params.get("prover", "honest")
    if prover_name == "honest":
        prover = protocols.ProverStrategy.honest(x, m)
        psi, phi = x.states()
        expected = info["kappa"] ** m
    elif prover_name == "identity":
        prover = protocols.ProverStrategy.identity(m)
        psi, phi = x.states()
        expected = abs(psi.overlap(phi)) ** (2 * m)
    else:
        raise UsageError(f"unknown prover {prover_name!r}")
    accepts = 0
    records = []
    for t in range(args.trials):
        res = protocols.szk_run(x, m, prover, args.seed.child("szk-trial", t))
        accepts += res.accepted
        for entry in res.transcript:
            records.append({"trial": t, **entry})
    _write_transcript(args, records)
    rate = accepts / args.trials
    sigma = math.sqrt(max(expected * (1 - expected), 1e-12) / args.trials)
    sim_dist = protocols.szk_simulator_distance(x, m)
    sim_bound = math.sqrt((m + 1) * max(0.0, 1 - info["kappa"])) + 1e-9
    results = {"m": m, "prover": prover_name, "kappa": info["kappa"],
               "trials": args.trials, "accept_rate": rate,
               "expected_accept": expected, "simulator_distance": sim_dist}
    checks = [
        _check("accept_rate_3sigma", abs(rate - expected), 3 * sigma + args.tol,
               "|rate - expected| <= 3 sigma"),
        _check("simulator_distance", sim_dist, sim_bound,
               "td(sim, real) <= sqrt((m+1) mu) + 1e-9"),
    ]
    return results, checks


def run_qip(args):
    x = _load_instance(args)
    m = int(args.params.get("m", 8))
    info = uhlmann.validate_instance(x)
    prover_name = args.params.get("prover", "honest")
    prover = protocols.ProverStrategy.honest(x, m) if prover_name == "honest" \
        else protocols.ProverStrategy.identity(m)
    oracle = protocols.OracleConfig(
        prep_error=float(args.params.get("prep_error", 0.0)),
        mode=args.params.get("mode", "ideal_reflection"))
    res = protocols.qip_run(x, m, prover, oracle, args.seed)
    _write_transcript(args, res.transcript)
    psi, phi = x.states()
    target = uhlmann.apply_uhlmann(x, 0.0, psi).density()
    td_out = trace_distance(res.output_state, target) if res.output_state else 1.0
    mu = max(0.0, 1 - info["kappa"])
    envelope = math.sqrt(4.0 / (m + 1)) + 5 * math.sqrt(mu) + oracle.prep_error + 0.05
    results = {"m": m, "prover": prover_name, "mode": oracle.mode,
               "prep_error": oracle.prep_error, "accept_prob": res.accept_prob,
               "output_distance": td_out, "kappa": info["kappa"]}
    checks = []
    if res.accept_prob >= 0.5:
        checks.append(_check("soundness_envelope", td_out, envelope,
                             "td(out, Phi(C)) <= sqrt(4/(m+1)) + 5 sqrt(mu) + prep + 0.05"))
    return results, checks


def run_amplify(args):
    nu = float(args.params.get("nu", 0.6))
    k = int(args.params.get("k", 2))
    t_rounds = int(args.params.get("T", 3))
    epr = GateCircuit(2, (("H", (0,)), ("CNOT", (0, 1))))
    x = uhlmann.UhlmannInstance(n=1, C=epr, D=epr)
    solver, nu_actual = protocols.engineered_solver(x, k, nu)
    cfg = protocols.AmplifierConfig(k, t_rounds, args.seed)
    res = protocols.amplify_run(x, solver, cfg, args.trials)
    results = {"nu_requested": nu, "nu": res["nu"], "k": k, "T": t_rounds,
               "trials": args.trials,
               "empirical_fidelity": res["empirical_fidelity"],
               "exact_mean_fidelity": res["exact_mean_fidelity"],
               "per_index_fidelity": res["per_index_fidelity"],
               "bound": res["bound"], "stderr": res["stderr"]}
    checks = [_check("amplification_bound",
                     res["empirical_fidelity"],
                     res["bound"] - 3 * res["stderr"] - args.tol,
                     "empirical >= 1 - (2(1-nu)^T + 32T/sqrt(k)) - 3 sigma", ">=")]
    return results, checks


def run_commit(args):
    if args.inputs:
        scheme = crypto.CommitmentScheme.from_json_dict(_load_json(args.inputs[0]))
        schemes = [scheme]
    else:
        count = int(args.params.get("schemes", 100))
        n_c = int(args.params.get("commit_qubits", 2))
        n_r = int(args.params.get("reveal_qubits", 2))
        gates = int(args.params.get("gates", 20))
        schemes = [crypto.random_scheme(n_c, n_r, gates,
                                        args.seed.child("scheme", i).value)
                   for i in range(count)]
    worst_mlc = 1.0
    worst_flavor = -1.0
    reports = []
    for scheme in schemes:
        rep = crypto.evaluate(scheme, attack=crypto.optimal_binding_attack(scheme))
        worst_mlc = min(worst_mlc,
                        rep.hiding_stat - (1 - math.sqrt(rep.binding_opt)))
        switched = crypto.evaluate(crypto.flavor_switch(scheme))
        worst_flavor = max(worst_flavor,
                           switched.hiding_stat - math.sqrt(rep.binding_opt))
        reports.append({"hiding_stat": rep.hiding_stat,
                        "binding_opt": rep.binding_opt,
                        "binding_attack": rep.binding_attack,
                        "switched_hiding": switched.hiding_stat})
    results = {"count": len(schemes), "schemes": reports[:10],
               "worst_mlc_margin": worst_mlc, "worst_flavor_excess": worst_flavor}
    checks = [
        _check("mayers_lo_chau", -worst_mlc, 1e-9,
               "hiding >= 1 - sqrt(binding) - 1e-9"),
        _check("flavor_switch_law", worst_flavor, 1e-8,
               "switched hiding <= sqrt(binding) + 1e-8"),
    ]
    return results, checks


def run_channel(args):
    if args.inputs:
        data = _load_json(args.inputs[0])
        circ = GateCircuit.from_json_dict(data["dilation"])
        ch = channel_from_circuit(circ, int(data["n_input"]), data["env"])
    else:
        n = int(args.params.get("qubits", 3))
        u = random_clifford(n, args.seed.child("channel"))
        ch = ChannelDesc(u, 2, 2 ** (n - 1), (2 ** (n - 1), 2))
    dec_fid = shannon.decoupling_fidelity(ch)
    decoded = shannon.decoder_from_uhlmann(ch)
    results = {"decoupling_fidelity": dec_fid,
               "decoder_fidelity": decoded["fidelity"]}
    checks = [_check("decoder_vs_decoupling", decoded["fidelity"],
                     dec_fid - args.tol,
                     "decoder fidelity >= decoupling fidelity", ">=")]
    return results, checks


def run_compress(args):
    spec = args.params.get("source", "mm:3")
    rho = _state_from_spec(spec)
    delta = float(args.params.get("delta", 0.1))
    s = args.params.get("s")
    s = int(s) if s is not None else None
    n_seeds = int(args.params.get("seeds", 5))
    tds = []
    for i in range(n_seeds):
        codec = shannon.compress(rho, delta, args.seed.child("codec", i), s=s)
        tds.append(shannon.roundtrip(codec, rho.purify()))
    bound = shannon.roundtrip_bound(rho, codec.s, delta)
    results = {"source": spec, "delta": delta, "s": codec.s,
               "roundtrip_td": tds, "max_td": max(tds),
               "contract_bound": bound}
    checks = [_check("roundtrip_contract", max(tds), bound,
                     "td((D o E)(psi), psi) <= max(delta, 20 nu^(1/4))")]
    return results, checks


def run_blackhole(args):
    if args.inputs:
        data = _load_json(args.inputs[0])
        circ = GateCircuit.from_json_dict(data["circuit"])
        inst = physics.BlackHoleInstance(circ, int(data["r"]))
        ch = inst.radiation_channel()
    else:
        n = int(args.params.get("qubits", 6))
        r = int(args.params.get("r", 4))
        u = random_clifford(n, args.seed.child("scrambler"))
        perm = linalg.permutation_matrix([2 ** (n - r), 2 ** r], [1, 0])
        ch = ChannelDesc(perm @ u, 2, 2 ** (n - 1), (2 ** r, 2 ** (n - r)))
    dec_fid = shannon.decoupling_fidelity(ch)
    decoded = shannon.decoder_from_uhlmann(ch)
    results = {"decoupling": dec_fid, "epr_fidelity": decoded["fidelity"]}
    checks = []
    if dec_fid >= 0.99:
        checks.append(_check("epr_recovery", decoded["fidelity"], 0.98,
                             "decoupling >= 0.99 implies EPR fidelity >= 0.98", ">="))
    return results, checks


def run_interfere(args):
    if args.inputs:
        data = _load_json(args.inputs[0])
        pair = physics.OrthPair(C=GateCircuit.from_json_dict(data["C"]),
                                D=GateCircuit.from_json_dict(data["D"]))
        pairs = [pair]
    else:
        count = int(args.params.get("pairs", 20))
        n = int(args.params.get("qubits", 3))
        gates = int(args.params.get("gates", 15))
        pairs = []
        for i in range(count):
            rng = args.seed.child("pair", i).generator()
            c = random_circuit(n, gates, rng)
            d = GateCircuit(n, (("X", (0,)),) + c.gates)
            pairs.append(physics.OrthPair(C=c, D=d))
    correct = 0
    for pair in pairs:
        c, d = pair.vectors()
        correct += physics.interference_detect(pair, (c + d) / math.sqrt(2)) == 0
        correct += physics.interference_detect(pair, (c - d) / math.sqrt(2)) == 1
    results = {"pairs": len(pairs), "decisions": 2 * len(pairs), "correct": correct}
    checks = [_check("all_correct", correct, 2 * len(pairs),
                     "every sign decision correct", ">=")]
    return results, checks


SCENARIOS = {
    "uhlmann": run_uhlmann, "szk": run_szk, "qip": run_qip,
    "amplify": run_amplify, "commit": run_commit, "channel": run_channel,
    "compress": run_compress, "blackhole": run_blackhole,
    "interfere": run_interfere, "entropy": run_entropy,
}


def _parse(argv) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="uhlmann-lab", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("scenario", choices=sorted(SCENARIOS))
    parser.add_argument("inputs", nargs="*", help="scenario input files")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--transcript", type=str, default=None,
                        help="write per-round protocol records as JSON lines")
    parser.add_argument("--param", action="append", default=[],
                        metavar="KEY=VALUE")
    args = parser.parse_args(argv)
    params = {}
    for entry in args.param:
        if "=" not in entry:
            raise UsageError(f"--param needs KEY=VALUE, got {entry!r}")
        key, value = entry.split("=", 1)
        params[key] = value
    args.params = params
    args.seed = Seed(args.seed)
    args.raw_argv = list(argv)
    args.instance = None
    if args.scenario in ("szk", "qip", "amplify", "uhlmann"):
        _absorb_config(args)
    return args


def main(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = _parse(argv if argv is not None else sys.argv[1:])
        results, checks = SCENARIOS[args.scenario](args)
    except (UsageError, SystemExit) as exc:
        if isinstance(exc, SystemExit):
            return int(exc.code or 0) and 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UhlmannLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {
        "scenario": args.scenario,
        "seed": args.seed.value,
        "params": dict(sorted(args.params.items())),
        "results": results,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    elapsed = time.perf_counter() - start
    summary = ", ".join(f"{c['name']}={'ok' if c['pass'] else 'FAIL'}" for c in checks)
    print(f"[{args.scenario}] {summary or 'no checks'} "
          f"(wall time {elapsed:.2f}s)", file=sys.stderr)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
