"""Command-line interface: ``ziplpcm simulate|fit|summarize|evaluate|replicate``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
Options may also come from a JSON file given with ``--config`` (keys are
the long option names with dashes replaced by underscores); command-line
values win. ``ZIPLPCM_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .model import Hyperparameters
from .netdata import NetworkFormatError, load_attributes, load_network, write_attributes, write_network
from .sampler import SamplerConfig, run_chain
from .simgen import PRESETS, GroundTruth, contaminate, get_preset, simulate, simulate_preset
from .summary import (PosteriorSummary, aggregate_replicates, roc_curve, study_report, summarize,
                      write_report, REPORT_COLUMNS)
from .traceio import TraceFormatError, load_trace, load_trace_network, save_trace

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
OUTPUT_ENV = "ZIPLPCM_OUTPUT_DIR"


class UsageError(Exception):
    pass


HYPER_DEFAULTS = Hyperparameters()
FIT_DEFAULTS = {
    "format": "dense-csv", "undirected": False, "iterations": 12000, "burnin": 2000, "seed": 0,
    "d": HYPER_DEFAULTS.d, "alpha": HYPER_DEFAULTS.alpha, "alpha1": HYPER_DEFAULTS.alpha1,
    "alpha2": HYPER_DEFAULTS.alpha2, "omega": HYPER_DEFAULTS.omega,
    "beta_prior": [HYPER_DEFAULTS.beta1, HYPER_DEFAULTS.beta2], "cohesion": None,
    "p_eject": HYPER_DEFAULTS.p_eject, "p0": HYPER_DEFAULTS.p0, "thin": 10, "store_U": False,
    "adapt_until": None, "tae_convention": "reversible", "init_partition": "auto", "init_k": 25,
    "pois": False, "supervised": False, "unsupervised": False, "attributes": None,
}


def _out_dir(args, default_name):
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUTPUT_ENV)
    return Path(base) / default_name if base else Path(default_name)


def _add_fit_options(p, with_data=True):
    g = p.add_argument_group("model and sampler")
    g.add_argument("--iterations", type=int)
    g.add_argument("--burnin", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--d", type=int, help="latent dimension")
    g.add_argument("--alpha", type=float)
    g.add_argument("--alpha1", type=float)
    g.add_argument("--alpha2", type=float)
    g.add_argument("--omega", type=float)
    g.add_argument("--beta-prior", type=float, nargs=2, metavar=("B1", "B2"))
    g.add_argument("--cohesion", type=float, nargs="+", help="one weight per attribute level")
    g.add_argument("--p-eject", type=float)
    g.add_argument("--p0", type=float)
    g.add_argument("--thin", type=int)
    g.add_argument("--store-U", action="store_true", default=None)
    g.add_argument("--adapt-until", type=int)
    g.add_argument("--tae-convention", choices=["reversible", "conditional"])
    g.add_argument("--init-partition", choices=["auto", "singletons", "kmeans"])
    g.add_argument("--init-k", type=int)
    g.add_argument("--pois", action="store_true", default=None, help="fit the Poisson variant")
    g.add_argument("--unsupervised", action="store_true", default=None,
                   help="ignore the attributes file")
    if with_data:
        g.add_argument("--supervised", action="store_true", default=None,
                       help="require attributes (their presence already enables supervision)")


def _build_parser():
    parser = argparse.ArgumentParser(prog="ziplpcm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic network with ground truth")
    p.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    p.add_argument("--spec", help="JSON generator spec: {kind, params, contaminate, directed}")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("fit", help="run the sampler on a network")
    p.add_argument("--network")
    p.add_argument("--format", choices=["dense-csv", "edge-list-csv"])
    p.add_argument("--undirected", action="store_true", default=None)
    p.add_argument("--attributes")
    p.add_argument("--config", help="JSON file of option values")
    p.add_argument("--manifest", help="replay a manifest written by a previous fit")
    p.add_argument("--out")
    _add_fit_options(p)

    p = sub.add_parser("summarize", help="point estimates and posterior means of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--max-candidates", type=int, default=500)
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="compare a summary with a ground truth")
    p.add_argument("--summary", required=True)
    p.add_argument("--truth")
    p.add_argument("--network", help="observed network (default: Y.csv next to the truth file)")
    p.add_argument("--out")

    p = sub.add_parser("replicate", help="simulate, fit, summarize and evaluate over many seeds")
    p.add_argument("--preset", required=True)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--seed-start", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out")
    _add_fit_options(p, with_data=False)
    return parser


def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve(args, config_path=None, defaults=FIT_DEFAULTS):
    """Merge built-in defaults, a JSON config file and command-line values."""
    values = dict(defaults)
    if config_path:
        try:
            cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        unknown = set(cfg) - set(defaults) - {"network"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(cfg)
    for key in list(values) + ["network"]:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _hyper_and_config(v):
    b1, b2 = v["beta_prior"]
    hyper = Hyperparameters(d=v["d"], alpha=v["alpha"], alpha1=v["alpha1"], alpha2=v["alpha2"],
                            omega=v["omega"], beta1=b1, beta2=b2,
                            cohesion=tuple(v["cohesion"]) if v["cohesion"] else None,
                            p_eject=v["p_eject"], p0=v["p0"])
    config = SamplerConfig(iterations=v["iterations"], burn_in=v["burnin"], seed=v["seed"],
                           supervised=None, adapt_until=v["adapt_until"], thin=v["thin"],
                           store_U=bool(v["store_U"]), zero_inflated=not v["pois"],
                           tae_convention=v["tae_convention"], init_partition=v["init_partition"],
                           init_k=v["init_k"])
    return hyper, config


def cmd_simulate(args):
    out = _out_dir(args, "simulation")
    if bool(args.preset) == bool(args.spec):
        raise UsageError("give exactly one of --preset or --spec")
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; valid presets: {', '.join(PRESETS)}")
        net, truth, attrs = simulate_preset(args.preset, args.seed)
    else:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        ss_net, ss_attr = np.random.SeedSequence(args.seed).spawn(2)
        net, truth = simulate(spec["kind"], spec["params"], np.random.default_rng(ss_net),
                              spec.get("directed", True))
        attrs = contaminate(truth.z_star, int(spec.get("contaminate", 0)), np.random.default_rng(ss_attr))
        truth.extra = {"spec": spec, "seed": args.seed}
    out.mkdir(parents=True, exist_ok=True)
    write_network(out / "Y.csv", net)
    write_attributes(out / "attributes.txt", attrs)
    truth.save(out / "truth.json")
    print(f"wrote {out / 'Y.csv'}, {out / 'attributes.txt'} and {out / 'truth.json'}")
    return EXIT_OK


def _fit_values(args):
    if args.manifest:
        m = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        v = dict(FIT_DEFAULTS)
        v.update(m["options"])
        for key, digest in (("network", m.get("network_sha256")), ("attributes", m.get("attributes_sha256"))):
            if v.get(key) and digest and _sha256_file(v[key]) != digest:
                raise NetworkFormatError(f"{key} file changed since the manifest was written")
        return v
    v = _resolve(args, args.config)
    if not v.get("network"):
        raise UsageError("fit needs --network (or a config/manifest providing it)")
    return v


def run_fit(v, out):
    """Fit from resolved option values; returns the trace directory."""
    net = load_network(v["network"], v["format"], directed=not v["undirected"])
    attrs = None
    if v["attributes"] and not v["unsupervised"]:
        attrs = load_attributes(v["attributes"], net.n)
    if v["supervised"] and attrs is None:
        raise UsageError("--supervised needs an attributes file")
    hyper, config = _hyper_and_config(v)
    trace = run_chain(net, attrs, hyper, config)
    out.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out / "trace", net)
    options = {k: v[k] for k in FIT_DEFAULTS}
    options["network"] = str(Path(v["network"]).resolve())
    if v["attributes"]:
        options["attributes"] = str(Path(v["attributes"]).resolve())
    manifest = {
        "command": "fit", "version": __version__, "options": options,
        "network_sha256": _sha256_file(v["network"]),
        "attributes_sha256": _sha256_file(v["attributes"]) if v["attributes"] else None,
        "data_sha256": net.digest(), "supervised": trace.supervised,
        "hyper": hyper.to_dict(), "sampler": config.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return out / "trace", trace, net


def cmd_fit(args):
    v = _fit_values(args)
    out = _out_dir(args, "fit")
    trace_dir, trace, _ = run_fit(v, out)
    rates = trace.acceptance_rates()
    print(f"wrote {trace_dir}; acceptance beta={rates['beta']:.3f} U={rates['U']:.3f}")
    return EXIT_OK


def cmd_summarize(args):
    trace = load_trace(args.trace)
    net = load_trace_network(args.trace)
    summary = summarize(trace, net, args.max_candidates)
    out = _out_dir(args, "summary")
    summary.save(out)
    print(f"wrote {out / 'summary.json'}: K_hat={summary.K_hat} evi={summary.evi:.4f}")
    return EXIT_OK


def evaluate_summary(summary: PosteriorSummary, truth: GroundTruth, y, out):
    row = study_report(summary, truth)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.csv", [row])
    if truth.nu_star is not None and np.any(truth.nu_star):
        points, auc = roc_curve(summary.nu_hat, truth.nu_star, y, summary.directed)
        with open(out / "roc.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr"])
            w.writerows([[f"{a:.17g}", f"{b:.17g}"] for a, b in points])
        row["auc"] = auc
    return row


def cmd_evaluate(args):
    if not args.truth:
        raise UsageError("evaluate needs --truth: the ground-truth JSON sidecar written by `simulate`")
    summary = PosteriorSummary.load(args.summary)
    truth = GroundTruth.load(args.truth)
    if len(truth.z_star) != len(summary.z_hat):
        raise NetworkFormatError("summary and truth describe networks of different sizes")
    y_path = Path(args.network) if args.network else Path(args.truth).with_name("Y.csv")
    y = load_network(y_path, directed=summary.directed).y
    if y.shape[0] != len(summary.z_hat):
        raise NetworkFormatError("network and summary describe different numbers of nodes")
    out = _out_dir(args, "evaluation")
    row = evaluate_summary(summary, truth, y, out)
    print(",".join(REPORT_COLUMNS))
    print(",".join(f"{row[c]:.4g}" for c in REPORT_COLUMNS))
    return EXIT_OK


def _replicate_one(job):
    preset, seed, v, out = job
    net, truth, attrs = simulate_preset(preset, seed)
    hyper, config = _hyper_and_config({**v, "seed": seed})
    use_attrs = None if v["unsupervised"] else attrs
    trace = run_chain(net, use_attrs, hyper, config)
    summary = summarize(trace, net)
    row = study_report(summary, truth)
    row["seed"] = seed
    if out is not None:
        d = Path(out) / f"seed-{seed}"
        summary.save(d / "summary")
        truth.save(d / "truth.json")
    return row


def cmd_replicate(args):
    if args.preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; valid presets: {', '.join(PRESETS)}")
    preset = get_preset(args.preset)
    defaults = dict(FIT_DEFAULTS)
    defaults.update({"iterations": preset.fit["iterations"], "burnin": preset.fit["burn_in"],
                     "beta_prior": list(preset.fit["beta_prior"])})
    for key in ("init_partition", "init_k"):
        if key in preset.fit:
            defaults[key] = preset.fit[key]
    v = _resolve(args, args.config, defaults)
    out = _out_dir(args, f"replicate-{args.preset}")
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(args.preset, s, v, str(out)) for s in range(args.seed_start, args.seed_start + args.seeds)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            rows = list(ex.map(_replicate_one, jobs))
    else:
        rows = [_replicate_one(j) for j in jobs]
    write_report(out / "rows.csv", rows, labels=[f"seed-{r['seed']}" for r in rows])
    agg = aggregate_replicates(rows)
    write_report(out / "quantiles.csv", [agg[q] for q in sorted(agg)],
                 labels=[f"q{int(round(q * 100))}" for q in sorted(agg)])
    print(f"wrote {out / 'rows.csv'} and {out / 'quantiles.csv'}")
    for q in sorted(agg):
        print(f"q{int(round(q * 100)):>3}: " + " ".join(f"{c}={agg[q][c]:.4g}" for c in REPORT_COLUMNS))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize,
            "evaluate": cmd_evaluate, "replicate": cmd_replicate}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetworkFormatError, TraceFormatError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
