"""Command-line entry point.

Subcommands: ``scenario``, ``generate-data``, ``train-cr``, ``evaluate``,
``simulate`` and ``replay``. Exit status is 0 on success, 1 on bad usage or a
failed validation (unreadable inputs, replay check failures) and 2 on an
internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from dataclasses import replace

import numpy as np

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2
TRAJ_FIELDS = ("step", "t", "uas_id", "px", "py", "pz", "vx", "vy", "vz")


class ValidationError(Exception):
    """Input or verification failure reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p, rho=None, delta=0.1, grid=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=delta, help="separation distance in meters")
    p.add_argument("--rho", type=float, default=rho, help="tube radius in meters")
    if grid:
        p.add_argument("--horizon", type=int, default=40, help="number of time steps H")
        p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--out", required=True)


def build_parser():
    parser = _Parser(prog="deconflict", description="Pairwise and fleet UAS deconfliction.")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("scenario", help="write a built-in scenario as JSON")
    _common(p, rho=0.055)
    p.add_argument("--kind", choices=("pair", "swap", "three-way", "unit-cube"), required=True)
    p.add_argument("--n-uas", type=int, default=10, help="fleet size for unit-cube")

    p = sub.add_parser("generate-data", help="oracle-labelled training set")
    _common(p, rho=0.05)
    p.add_argument("--n", type=int, default=2000)

    p = sub.add_parser("train-cr", help="train the decision classifier")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("evaluate", help="separation rates and timing per policy and tube ratio")
    _common(p)
    p.add_argument("--policies", default="random,greedy,learned,learned+repair,oracle,milp")
    p.add_argument("--model", help="classifier file for learned policies")
    p.add_argument("--n", type=int, default=300, help="pool size")
    p.add_argument("--ratios", default="0.5,0.95,1.15", help="comma-separated rho/delta values")
    p.add_argument("--records", help="also write per-instance records (JSON lines)")

    p = sub.add_parser("simulate", help="receding-horizon fleet run; writes run log and trajectory CSV")
    _common(p, delta=None, grid=False)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--policy", default="greedy", choices=("random", "greedy", "learned", "oracle"))
    p.add_argument("--model", help="classifier file for the learned policy")
    p.add_argument("--steps", type=int, help="number of executed steps (default: full horizon)")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--no-shrink", action="store_true")

    p = sub.add_parser("replay", help="re-check a simulate run from its files")
    p.add_argument("--run", required=True, help="directory written by simulate")
    p.add_argument("--delta", type=float, help="override the scenario's delta")
    return parser


def _T(args):
    return args.horizon * args.dt


def _model(args):
    from .dynamics import build_model

    if not args.dt > 0 or args.horizon < 1:
        raise ValidationError("--dt and --horizon must be positive")
    return build_model(args.dt)


def _load_classifier(path):
    from .learning import ModelFileError, ModelVersionError, load_model

    if not path:
        raise ValidationError("learned policies need --model")
    try:
        return load_model(path)
    except (ModelFileError, ModelVersionError, FileNotFoundError) as exc:
        raise ValidationError(str(exc)) from exc


def cmd_scenario(args):
    from .scenarios import gen_colliding_pair, gen_position_swap, gen_three_way, gen_unit_cube, save_scenario

    kw = dict(T=_T(args), dt=args.dt, delta=args.delta, rho=args.rho)
    if args.kind == "pair":
        sc = gen_colliding_pair(args.seed, **kw)
    elif args.kind == "swap":
        sc = gen_position_swap(**kw)
    elif args.kind == "three-way":
        sc = gen_three_way(**kw)
    else:
        sc = gen_unit_cube(args.n_uas, args.seed, **kw)
    save_scenario(sc, args.out)
    print(f"wrote {args.out} ({len(sc.uas)} UAS)")


def cmd_generate_data(args):
    from .learning import generate_dataset, save_dataset

    model = _model(args)
    ds = generate_dataset(args.n, model, args.delta, args.rho, args.seed, {"T": _T(args)})
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} examples to {args.out}")


def cmd_train_cr(args):
    from .learning import DatasetFileError, TrainConfig, accuracy, load_dataset, save_model, train

    try:
        ds = load_dataset(args.data)
    except (DatasetFileError, FileNotFoundError) as exc:
        raise ValidationError(str(exc)) from exc
    try:
        cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                          seed=args.seed, hidden=args.hidden)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    res = train(ds, cfg, verbose=args.verbose)
    save_model(res.model, args.out)
    print(f"loss {res.initial_loss:.4f} -> {res.final_loss:.4f}, "
          f"accuracy {accuracy(res.model, ds):.4f}; wrote {args.out}")


def cmd_evaluate(args):
    from .evaluation import build_pool, evaluate_policies, parse_policy

    policies = [s.strip() for s in args.policies.split(",") if s.strip()]
    try:
        for name in policies:
            parse_policy(name)
        ratios = [float(r) for r in args.ratios.split(",")]
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    classifier = None
    if any(name.startswith("learned") for name in policies):
        classifier = _load_classifier(args.model)
    model = _model(args)
    pool = build_pool(args.n, model, args.delta, args.seed, min(ratios), {"T": _T(args)})
    report = evaluate_policies(pool, policies, model, args.delta, ratios, classifier, seed=args.seed)
    report.to_csv(args.out)
    if args.records:
        report.write_records(args.records)
    for row in report.summary():
        print(f"{row['policy']:>16s}  {row['rho_over_delta']:5.2f}  n={row['n']:4d}  "
              f"rate={row['separation_rate']:.3f}  {row['mean_ms']:7.2f} +- {row['std_ms']:.2f} ms")


def _policy(name, args, model, delta):
    from .policies import GreedyPolicy, LearnedPolicy, OraclePolicy, RandomPolicy

    if name == "random":
        return RandomPolicy(args.seed)
    if name == "greedy":
        return GreedyPolicy(delta)
    if name == "oracle":
        return OraclePolicy(model, delta)
    return LearnedPolicy(_load_classifier(args.model))


def cmd_simulate(args):
    from .dynamics import build_model
    from .lnf import simulate_receding_horizon
    from .scenarios import load_scenario, save_scenario

    try:
        sc = load_scenario(args.scenario)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"cannot read scenario: {exc}") from exc
    if args.rho is not None or args.delta is not None:
        try:
            sc = replace(sc, rho=sc.rho if args.rho is None else args.rho,
                         delta=sc.delta if args.delta is None else args.delta)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    model = build_model(sc.dt)
    fleet = sc.fleet(model)
    cr = _policy(args.policy, args, model, sc.delta)
    try:
        run = simulate_receding_horizon(fleet, cr, model, sc.delta, args.steps,
                                        repair=not args.no_repair, shrink=not args.no_shrink)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    save_scenario(sc, os.path.join(args.out, "scenario.json"))
    with open(os.path.join(args.out, "run_log.jsonl"), "w") as fh:
        fh.writelines(line + "\n" for line in run.log_lines)
    with open(os.path.join(args.out, "trajectories.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJ_FIELDS)
        for uid in sorted(run.executed):
            for k, x in enumerate(run.executed[uid]):
                w.writerow([k, repr(round(k * sc.dt, 12)), uid] + [repr(float(v)) for v in x])
    unresolved = sum(len(s.unresolved) for s in run.steps)
    print(f"{len(run.steps)} steps, {sum(s.l2f_call_count for s in run.steps)} pairwise calls, "
          f"{unresolved} unresolved; wrote {args.out}")


def replay_run(run_dir, delta=None):
    """Independent checks of a simulate run; returns ``(ok, messages)``."""
    from .lnf import LOG_FIELDS
    from .scenarios import load_scenario

    msgs = []
    sc = load_scenario(os.path.join(run_dir, "scenario.json"))
    delta = sc.delta if delta is None else delta
    states = {}
    with open(os.path.join(run_dir, "trajectories.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != TRAJ_FIELDS:
        return False, ["trajectory CSV has unexpected columns"]
    for r in rows:
        states.setdefault(int(r["uas_id"]), {})[int(r["step"])] = [float(r[c]) for c in TRAJ_FIELDS[3:6]]
    ids = sorted(states)
    steps = sorted(states[ids[0]])
    if any(sorted(states[u]) != steps for u in ids):
        return False, ["vehicles have different step sets"]
    P = np.array([[states[u][k] for k in steps] for u in ids])
    ok = True
    worst = np.inf
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            sep = np.max(np.abs(P[a] - P[b]), axis=1)
            worst = min(worst, float(sep.min()))
            bad = np.flatnonzero(sep < delta - 1e-9)
            if len(bad):
                ok = False
                msgs.append(f"UAS {ids[a]}-{ids[b]} closer than {delta} at steps {bad.tolist()}")
    with open(os.path.join(run_dir, "run_log.jsonl")) as fh:
        for n, line in enumerate(fh, start=1):
            rec = json.loads(line)
            if tuple(rec) != LOG_FIELDS:
                ok = False
                msgs.append(f"log line {n} has fields {list(rec)}")
    msgs.append(f"{len(ids)} UAS, {len(steps)} samples, minimum executed separation {worst:.6g} m")
    return ok, msgs


def cmd_replay(args):
    try:
        ok, msgs = replay_run(args.run, args.delta)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"cannot replay {args.run}: {exc}") from exc
    for m in msgs:
        print(m)
    print("PASS" if ok else "FAIL")
    if not ok:
        raise ValidationError("replay found violations")


COMMANDS = {"scenario": cmd_scenario, "generate-data": cmd_generate_data, "train-cr": cmd_train_cr,
            "evaluate": cmd_evaluate, "simulate": cmd_simulate, "replay": cmd_replay}


def run_cli(argv=None):
    """Parse ``argv`` and run the subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        COMMANDS[args.cmd](args)
    except ValidationError as exc:
        print(f"deconflict {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
