"""Command line front-end.

Sub-commands::

    ddmap synth      --scenario NAME [--seed N] [--out DIR]
    ddmap run        --mode ecg|abp|custom --input signal.csv [--out DIR] [--landmarks truth.csv]
                     [--config cfg.yaml] [--set key=value ...] [--fs HZ] [--record-timings]
    ddmap run        --from-manifest manifest.json [--out DIR]
    ddmap preprocess --mode ... --input signal.csv [--out DIR]
    ddmap extract    --mode ... --input signal.csv [--out DIR] [--landmarks truth.csv]
    ddmap embed      --input cycles.csv [--mode ...] [--out DIR]
    ddmap analyze    --input embedding.csv [--mode ...] [--out DIR] [--edr]
    ddmap inspect    embedding.csv | DIR

Exit status is 0 on success, 1 when a pipeline stage or the data fails and
2 for usage and configuration errors. ``DDMAP_OUT`` sets the default output
directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import dynamics as dyn
from .cycles import CycleMatrix
from .diffusion import KernelConfig, diffusion_map
from .scenarios import SCENARIOS, make_scenario
from .timeseries import (
    FLOAT_FMT,
    PipelineError,
    read_csv_columns,
    read_timeseries,
    write_csv,
    write_timeseries,
)

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "ddmap_out"


class UsageError(Exception):
    """Bad arguments, configuration or missing files (exit 2)."""


class DataError(Exception):
    """Input present but unusable, or a stage failed (exit 1)."""


# ---------------------------------------------------------------------------
# helpers


def _out_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get("DDMAP_OUT") or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _parse_set(items: list[str]) -> dict:
    """``key=value`` pairs with YAML-typed values; ``kernel.t=1`` addresses nested keys."""
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise UsageError(f"cannot parse value for {key}: {exc}") from exc
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def _merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(merged.get(k), dict):
            merged[k] = _merge(merged[k], v)
        else:
            merged[k] = v
    return merged


def _load_overrides(config_path: str | None, sets: list[str] | None) -> dict:
    tree: dict = {}
    p = _existing(config_path, "config file")
    if p is not None:
        try:
            loaded = yaml.safe_load(p.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise UsageError(f"{p}: invalid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise UsageError(f"{p}: top level must be a mapping")
        tree = loaded
    return _merge(tree, _parse_set(sets))


def resolve_config(mode: str, overrides: dict) -> dyn.PipelineConfig:
    """Materialize every pipeline option for ``mode`` with ``overrides`` applied."""
    over = dict(overrides)
    over.pop("mode", None)
    try:
        return dyn.PipelineConfig.for_mode(mode, **over)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _config_from_args(args) -> dyn.PipelineConfig:
    overrides = _load_overrides(args.config, args.set)
    mode = args.mode or overrides.get("mode") or "custom"
    return resolve_config(mode, overrides)


def _read_signal(path: Path, fs: float | None):
    try:
        return read_timeseries(path, fs)
    except (ValueError, KeyError) as exc:
        raise DataError(f"cannot read signal: {exc}") from exc


def _read_landmarks(path: Path | None) -> np.ndarray | None:
    if path is None:
        return None
    try:
        cols = read_csv_columns(path)
        key = "landmark_sample" if "landmark_sample" in cols else next(iter(cols))
        return np.array([int(float(v)) for v in cols[key]], dtype=np.int64)
    except (ValueError, StopIteration) as exc:
        raise DataError(f"cannot read landmarks: {exc}") from exc


def _write_cycles(out: Path, lm, X: CycleMatrix) -> None:
    write_csv(out / "landmarks.csv", ["landmark_sample", "time_s"], [lm.indices, lm.times])
    X.export(out / "cycles.csv", out / "cycles.json")


def _write_embedding(out: Path, emb, lm_samples, times) -> None:
    emb.export(out / "embedding.csv", out / "eigenvalues.json", lm_samples, times)


def _write_analysis(out: Path, u, clusters, lm_samples, edr=None) -> list[str]:
    u.export(out / "u_trace.csv")
    write_csv(out / "clusters.csv", ["landmark_sample", "time_s", "sign_class", "ectopic"],
              [np.asarray(lm_samples, np.int64), u.times, clusters.sign_classes(), clusters.labels()])
    names = ["u_trace.csv", "clusters.csv"]
    if edr is not None:
        edr.export(out / "edr.csv")
        names.append("edr.csv")
    return names


# ---------------------------------------------------------------------------
# sub-commands


def cmd_synth(args) -> int:
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    ds = make_scenario(args.scenario, seed=args.seed)
    out = _out_dir(args.out)
    paths = ds.export(out)
    print(f"wrote {len(paths)} files to {out} (scenario {args.scenario}, seed {args.seed})")
    return EXIT_OK


def _run_inputs_from_manifest(path: Path):
    try:
        man = json.loads(path.read_text(encoding="utf-8"))
        inp = Path(man["input"])
        cfg_tree = man["config"]
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a run manifest ({exc})") from exc
    if not inp.is_file():
        raise UsageError(f"input listed in manifest not found: {inp}")
    if _sha256(inp) != man.get("input_sha256"):
        raise UsageError(f"input {inp} does not match the digest recorded in the manifest")
    lm_path = man.get("landmarks")
    if lm_path is not None:
        lm_path = _existing(lm_path, "landmark file")
        if _sha256(lm_path) != man.get("landmarks_sha256"):
            raise UsageError(f"landmarks {lm_path} do not match the digest recorded in the manifest")
    cfg = resolve_config(cfg_tree.get("mode", "custom"), cfg_tree)
    return inp, lm_path, cfg, man.get("fs"), man.get("seed"), bool(man.get("timings") is not None)


def _sibling_seed(inp: Path):
    side = inp.with_name("dataset.json")
    if side.is_file():
        try:
            return json.loads(side.read_text(encoding="utf-8")).get("seed")
        except ValueError:
            return None
    return None


def cmd_run(args) -> int:
    if args.from_manifest:
        inp, lm_path, cfg, fs, seed, timed = _run_inputs_from_manifest(
            _existing(args.from_manifest, "manifest"))
        record_timings = args.record_timings or timed
    else:
        if not args.input:
            raise UsageError("run needs --input (or --from-manifest)")
        inp = _existing(args.input, "input file")
        lm_path = _existing(args.landmarks, "landmark file")
        cfg = _config_from_args(args)
        fs = args.fs
        seed = args.seed if args.seed is not None else _sibling_seed(inp)
        record_timings = args.record_timings
    x = _read_signal(inp, fs)
    landmarks = _read_landmarks(lm_path)
    res = dyn.run_pipeline(x, cfg, landmarks)
    out = _out_dir(args.out)

    lm = res.ddmap.landmarks
    t_cycles = res.u_trace.times
    _write_embedding(out, res.ddmap.embedding, lm.indices, t_cycles)
    _write_cycles(out, lm, res.ddmap.cycles)
    outputs = ["embedding.csv", "eigenvalues.json", "landmarks.csv", "cycles.csv", "cycles.json"]
    outputs += _write_analysis(out, res.u_trace, res.clusters, lm.indices, res.edr)

    manifest = {
        "command": "run",
        "version": __version__,
        "mode": cfg.mode,
        "input": str(inp.resolve()),
        "input_sha256": _sha256(inp),
        "landmarks": None if lm_path is None else str(lm_path.resolve()),
        "landmarks_sha256": None if lm_path is None else _sha256(lm_path),
        "fs": fs,
        "seed": seed,
        "config": cfg.to_dict(),
        "outputs": sorted(outputs + ["manifest.json"]),
        "summary": {
            "n_cycles": int(res.ddmap.cycles.n_cycles),
            "n_ectopic": int(res.clusters.ectopic_set.size),
            "spectral_gap": float(res.ddmap.embedding.spectral_gap),
        },
        "timings": {k: float(v) for k, v in sorted(res.timings.items())} if record_timings else None,
    }
    _dump_json(out / "manifest.json", manifest)
    print(f"{cfg.mode} run: {manifest['summary']['n_cycles']} cycles, "
          f"{manifest['summary']['n_ectopic']} ectopic, gap {FLOAT_FMT % manifest['summary']['spectral_gap']}; "
          f"outputs in {out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    inp = _existing(args.input, "input file")
    cfg = _config_from_args(args)
    x = _read_signal(inp, args.fs)
    y = dyn.condition(x, cfg)
    out = _out_dir(args.out)
    write_timeseries(out / "conditioned.csv", y)
    print(f"conditioned signal ({len(y)} samples at {y.fs:g} Hz) written to {out / 'conditioned.csv'}")
    return EXIT_OK


def cmd_extract(args) -> int:
    inp = _existing(args.input, "input file")
    cfg = _config_from_args(args)
    x = _read_signal(inp, args.fs)
    y = dyn.condition(x, cfg)
    lm, X = dyn.extract(y, cfg, _read_landmarks(_existing(args.landmarks, "landmark file")), x.fs)
    out = _out_dir(args.out)
    _write_cycles(out, lm, X)
    print(f"{X.n_cycles} cycles of {X.p} samples written to {out}")
    return EXIT_OK


def _read_cycles(path: Path) -> CycleMatrix:
    side = path.with_suffix(".json")
    if not side.is_file():
        raise UsageError(f"cycle sidecar not found: {side}")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
        cols = read_csv_columns(path)
        rows = np.array([cols[k] for k in cols], dtype=float).T
        return CycleMatrix(rows, meta["left_ms"], meta["right_ms"], meta["fs"],
                           np.asarray(meta["landmark_indices"], dtype=np.int64),
                           bool(meta.get("normalized", False)))
    except (ValueError, KeyError) as exc:
        raise DataError(f"cannot read cycles: {exc}") from exc


def cmd_embed(args) -> int:
    X = _read_cycles(_existing(args.input, "cycle file"))
    cfg = _config_from_args(args)
    try:
        emb = diffusion_map(X, cfg.kernel)
    except ValueError as exc:
        raise PipelineError("embed", str(exc)) from exc
    out = _out_dir(args.out)
    _write_embedding(out, emb, X.landmark_indices, X.times)
    print(f"embedding of {X.n_cycles} cycles (d={emb.d}) written to {out}")
    return EXIT_OK


def _read_embedding(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        cols = read_csv_columns(path)
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed embedding file: {exc}") from exc
    keys = [k for k in cols if k.startswith("coord_")]
    if not keys:
        raise UsageError(f"{path}: no coord_k columns")
    try:
        coords = np.array([cols[k] for k in keys], dtype=float).T
        n = coords.shape[0]
        samples = np.array(cols.get("landmark_sample", range(n)), dtype=float).astype(np.int64)
        times = np.array(cols.get("time_s", range(n)), dtype=float)
    except ValueError as exc:
        raise UsageError(f"malformed embedding file: {exc}") from exc
    if not np.all(np.isfinite(coords)):
        raise UsageError(f"{path}: non-finite coordinates")
    return coords, samples, times


def cmd_analyze(args) -> int:
    coords, samples, times = _read_embedding(_existing(args.input, "embedding file"))
    cfg = _config_from_args(args)
    try:
        u = dyn.compress_svd(coords, times)
        clusters = dyn.sign_cluster(u)
        u.labels = clusters.labels()
        edr = None
        if args.edr:
            normal = np.sort(clusters.normal_set)
            k = cfg.edr_coordinate
            if k == "auto":
                k = dyn.edr_coordinate(coords, normal)
            if k > coords.shape[1]:
                raise ValueError(f"edr_coordinate {k} exceeds embedding dimension {coords.shape[1]}")
            V = dyn.interpolate_trace(times[normal], coords[normal, k - 1], cfg.interp_fs)
            edr = dyn.sliding_normalize(V, cfg.halfwidth)
    except ValueError as exc:
        raise PipelineError("analyze", str(exc)) from exc
    out = _out_dir(args.out)
    names = _write_analysis(out, u, clusters, samples, edr)
    print(f"{clusters.ectopic_set.size} of {clusters.n} cycles flagged ectopic; wrote {', '.join(names)}")
    return EXIT_OK


def inspect_report(coords: np.ndarray, eigenvalues: np.ndarray | None) -> str:
    lines = [f"cycles: {coords.shape[0]}", f"dimension d: {coords.shape[1]}"]
    if eigenvalues is not None:
        lines.append("eigenvalues (lambda_2 ... lambda_{d+1}):")
        lines += [f"  {k + 2:>3d}  {FLOAT_FMT % v}" for k, v in enumerate(eigenvalues)]
        if eigenvalues.size > 1:
            lines.append(f"spectral gap lambda_2 - lambda_3: {FLOAT_FMT % (eigenvalues[0] - eigenvalues[1])}")
    else:
        lines.append("eigenvalues: unavailable (no eigenvalues.json next to the embedding)")
    rms = np.sqrt(np.mean(coords ** 2, axis=0))
    lines.append("per-coordinate RMS:")
    lines += [f"  coord_{k + 1:<3d} {FLOAT_FMT % v}" for k, v in enumerate(rms)]
    return "\n".join(lines)


def cmd_inspect(args) -> int:
    target = Path(args.path)
    if target.is_dir():
        target = target / "embedding.csv"
    if not target.is_file():
        raise UsageError(f"embedding file not found: {target}")
    coords, _, _ = _read_embedding(target)
    eig = None
    side = target.with_name("eigenvalues.json")
    if side.is_file():
        try:
            eig = np.asarray(json.loads(side.read_text(encoding="utf-8"))["lambda"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed eigenvalue file {side}: {exc}") from exc
        if np.any(np.diff(eig) > 1e-12):
            warnings.warn("eigenvalues are not in nonincreasing order", stacklevel=2)
    print(inspect_report(coords, eig))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _pipeline_options(p: argparse.ArgumentParser, input_required: bool = True) -> None:
    p.add_argument("--mode", choices=dyn.MODES, help="preset defaults (ecg, abp or custom)")
    p.add_argument("--input", required=input_required, help="time,value CSV")
    p.add_argument("--out", help="output directory (default: $DDMAP_OUT or ./ddmap_out)")
    p.add_argument("--config", help="YAML file with pipeline options")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one option, e.g. kernel.t=1 (repeatable)")
    p.add_argument("--fs", type=float, help="sampling rate; inferred from the time column if omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddmap", description="Dynamic diffusion maps for oscillatory signals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--scenario", required=True, help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline")
    _pipeline_options(p, input_required=False)
    p.add_argument("--landmarks", help="CSV of landmark sample indices (column landmark_sample)")
    p.add_argument("--seed", type=int, help="seed recorded in the manifest")
    p.add_argument("--from-manifest", help="repeat the run described by a manifest.json")
    p.add_argument("--record-timings", action="store_true",
                   help="store stage timings in the manifest (outputs are then not byte-stable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preprocess", help="conditioning only")
    _pipeline_options(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("extract", help="conditioning, landmarks and cycle excision")
    _pipeline_options(p)
    p.add_argument("--landmarks")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("embed", help="diffusion map of a cycles.csv")
    _pipeline_options(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("analyze", help="SVD compression, sign clustering and optional EDR")
    _pipeline_options(p)
    p.add_argument("--edr", action="store_true", help="also derive the normalized EDR trace")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("inspect", help="report eigenvalues, gap and coordinate RMS")
    p.add_argument("path", help="embedding.csv or a run directory")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ddmap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"ddmap: stage '{exc.stage}' failed: {exc.message}", file=sys.stderr)
        return EXIT_PIPELINE
    except DataError as exc:
        print(f"ddmap: error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
