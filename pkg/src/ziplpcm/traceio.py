"""On-disk layout of a chain trace.

A trace directory holds

``header.json``
    Seed, hyperparameters, sampler settings, data digest, acceptance
    counters and the SHA-256 of every other file. ``header_sha256`` is the
    digest of the header itself serialized without that key (sorted keys,
    compact separators).
``iterations.csv``
    ``iter,beta,K,loglik,z,P`` per iteration. ``z`` is run-length encoded
    (``label x count`` tokens joined by ``;``), ``P`` is the row-major
    ``K x K`` matrix joined by ``;``.
``nu_sum.csv``, ``p_sum.csv``, ``lambda_sum.csv``, ``d_sum.csv``
    Post-burn-in running sums; divide by ``n_post`` for means.
``best_states.csv`` and ``best_states_U.bin``
    One row per distinct post-burn-in partition with its best complete
    log-likelihood and iteration. The binary file stacks the matching
    ``N x d`` position matrices in row order as little-endian float64,
    row-major.
``U_snapshots.csv`` and ``U_snapshots.bin`` (optional)
    Thinned position snapshots in the same binary layout.
``network.csv``
    The fitted adjacency matrix.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .model import Hyperparameters
from .netdata import WeightedNetwork, read_matrix, write_matrix
from .partition import rle_decode, rle_encode
from .sampler.chain import ChainTrace, SamplerConfig

FORMAT = "ziplpcm-trace"
VERSION = 1
SUM_FILES = ("nu_sum", "p_sum", "lambda_sum", "d_sum")


class TraceFormatError(ValueError):
    """The trace directory is incomplete, corrupt or from another format."""


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _header_digest(header):
    body = {k: v for k, v in header.items() if k != "header_sha256"}
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _fmt(v):
    return f"{float(v):.17g}"


def save_trace(trace: ChainTrace, out_dir, data: WeightedNetwork | None = None):
    """Write ``trace`` (and optionally the fitted network) to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    with open(out / "iterations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "beta", "K", "loglik", "z", "P"])
        for t in range(trace.z.shape[0]):
            w.writerow([t, _fmt(trace.beta[t]), int(trace.K[t]), _fmt(trace.loglik[t]),
                        rle_encode(trace.z[t]), ";".join(_fmt(v) for v in np.ravel(trace.P[t]))])
    files.append("iterations.csv")
    for name in SUM_FILES:
        write_matrix(out / f"{name}.csv", np.asarray(getattr(trace, name), dtype=float))
        files.append(f"{name}.csv")
    keys = sorted(trace.best_states, key=lambda k: trace.best_states[k][1])
    with open(out / "best_states.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "iter", "loglik", "z"])
        for row, key in enumerate(keys):
            ll, it, _ = trace.best_states[key]
            w.writerow([row, it, _fmt(ll), rle_encode(np.frombuffer(key, dtype=np.int16))])
    stack = (np.stack([trace.best_states[k][2] for k in keys]) if keys
             else np.zeros((0, trace.n, trace.d)))
    (out / "best_states_U.bin").write_bytes(np.ascontiguousarray(stack, dtype="<f8").tobytes())
    files += ["best_states.csv", "best_states_U.bin"]
    if trace.U_snapshots:
        with open(out / "U_snapshots.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write("row,iter\n")
            for row, (it, _) in enumerate(trace.U_snapshots):
                fh.write(f"{row},{it}\n")
        snap = np.stack([U for _, U in trace.U_snapshots])
        (out / "U_snapshots.bin").write_bytes(np.ascontiguousarray(snap, dtype="<f8").tobytes())
        files += ["U_snapshots.csv", "U_snapshots.bin"]
    if data is not None:
        write_matrix(out / "network.csv", data.y)
        files.append("network.csv")
    header = {
        "format": FORMAT, "version": VERSION, "seed": trace.config.seed,
        "n": trace.n, "d": trace.d, "directed": trace.directed, "supervised": trace.supervised,
        "data_sha256": trace.data_digest, "hyper": trace.hyper.to_dict(), "config": trace.config.to_dict(),
        "n_post": trace.n_post, "accept": {k: list(v) for k, v in trace.accept.items()},
        "sigma2_beta": trace.sigma2_beta, "sigma2_U": trace.sigma2_U,
        "files": {name: _sha256(out / name) for name in files},
    }
    header["header_sha256"] = _header_digest(header)
    (out / "header.json").write_text(json.dumps(header, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out


def read_header(trace_dir):
    path = Path(trace_dir) / "header.json"
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TraceFormatError(f"no trace header at {path}") from None
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"trace header is not valid JSON: {exc}") from None
    if header.get("format") != FORMAT:
        raise TraceFormatError("not a ziplpcm trace directory")
    if header.get("header_sha256") != _header_digest(header):
        raise TraceFormatError("trace header checksum mismatch")
    return header


def load_trace(trace_dir, verify=True) -> ChainTrace:
    """Read a trace written by :func:`save_trace`, checking every checksum."""
    root = Path(trace_dir)
    header = read_header(root)
    if verify:
        for name, digest in header["files"].items():
            p = root / name
            if not p.exists():
                raise TraceFormatError(f"trace file {name} is missing")
            if _sha256(p) != digest:
                raise TraceFormatError(f"checksum mismatch for {name}")
    n, d = header["n"], header["d"]
    config = SamplerConfig.from_dict(header["config"])
    rows = list(csv.DictReader(open(root / "iterations.csv", encoding="utf-8")))
    if len(rows) != config.iterations:
        raise TraceFormatError(f"trace has {len(rows)} iterations, header says {config.iterations}")
    T = len(rows)
    z = np.zeros((T, n), dtype=np.int16)
    K = np.zeros(T, dtype=np.int32)
    beta = np.zeros(T)
    loglik = np.zeros(T)
    P = []
    for t, r in enumerate(rows):
        z[t] = rle_decode(r["z"])
        K[t] = int(r["K"])
        beta[t] = float(r["beta"])
        loglik[t] = float(r["loglik"])
        P.append(np.array(r["P"].split(";"), dtype=float).reshape(K[t], K[t]))
    trace = ChainTrace(
        n=n, d=d, directed=header["directed"], hyper=Hyperparameters.from_dict(header["hyper"]),
        config=config, supervised=header["supervised"], data_digest=header["data_sha256"],
        z=z, K=K, beta=beta, loglik=loglik, P=P, n_post=header["n_post"],
        accept={k: tuple(v) for k, v in header["accept"].items()},
        sigma2_beta=header["sigma2_beta"], sigma2_U=header["sigma2_U"],
    )
    for name in SUM_FILES:
        setattr(trace, name, read_matrix(root / f"{name}.csv").reshape(n, n))
    best_rows = list(csv.DictReader(open(root / "best_states.csv", encoding="utf-8")))
    Us = np.frombuffer((root / "best_states_U.bin").read_bytes(), dtype="<f8")
    if Us.size != len(best_rows) * n * d:
        raise TraceFormatError("best_states_U.bin size does not match best_states.csv")
    Us = Us.reshape(len(best_rows), n, d)
    for r, U in zip(best_rows, Us):
        zk = rle_decode(r["z"]).astype(np.int16)
        ll, it = float(r["loglik"]), int(r["iter"])
        trace.best_states[zk.tobytes()] = (ll, it, U.copy())
        if trace.best_overall is None or ll > trace.best_overall[0]:
            trace.best_overall = (ll, it, zk.astype(np.int64), U.copy())
    if (root / "U_snapshots.bin").exists():
        its = [int(r["iter"]) for r in csv.DictReader(open(root / "U_snapshots.csv", encoding="utf-8"))]
        snap = np.frombuffer((root / "U_snapshots.bin").read_bytes(), dtype="<f8").reshape(len(its), n, d)
        trace.U_snapshots = [(it, U.copy()) for it, U in zip(its, snap)]
    return trace


def load_trace_network(trace_dir):
    """The network stored alongside a trace, checked against the header digest."""
    root = Path(trace_dir)
    header = read_header(root)
    path = root / "network.csv"
    if not path.exists():
        raise TraceFormatError("trace directory has no network.csv")
    net = WeightedNetwork(read_matrix(path, dtype=np.int64), directed=header["directed"])
    if net.digest() != header["data_sha256"]:
        raise TraceFormatError("stored network does not match the trace's data digest")
    return net
