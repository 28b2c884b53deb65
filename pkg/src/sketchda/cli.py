"""Command-line driver: ``sketchda {train,eval,verify,synth}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 bound verification failed.
"""

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .discriminant import DiscriminantModel, OnlineDiscriminant
from .errors import ConfigurationError, SketchDAError
from .evaluation import METRICS, evaluate
from .formats import load_arrays, read_samples
from .oracle import verify_bounds
from .stats import approx_scatters
from .synth import make_two_view, write_splits

log = logging.getLogger("sketchda")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
DEFAULT_MAX_ELEMENTS = 50_000_000


@dataclass
class RunConfig:
    sketch_size: int = 64
    reduced_dim: Optional[int] = None
    n_components: Optional[int] = None
    ridge: Optional[float] = None
    metric: str = "euclidean"
    seed: int = 0
    input: Optional[str] = None
    model: Optional[str] = None
    query: Optional[str] = None
    gallery: Optional[str] = None
    out: Optional[str] = None
    cmc_csv: Optional[str] = None
    exclude_same_camera: bool = False
    max_elements: int = DEFAULT_MAX_ELEMENTS

    def validate(self):
        if self.sketch_size < 1:
            raise ConfigurationError(f"sketch-size must be >= 1, got {self.sketch_size}")
        if self.reduced_dim is not None and not 1 <= self.reduced_dim <= self.sketch_size:
            raise ConfigurationError(
                f"reduced-dim must be in [1, sketch-size={self.sketch_size}], got {self.reduced_dim}"
            )
        if self.n_components is not None and self.n_components < 1:
            raise ConfigurationError(f"components must be >= 1, got {self.n_components}")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigurationError(f"ridge must be >= 0, got {self.ridge}")
        if self.metric not in METRICS:
            raise ConfigurationError(f"metric must be one of {METRICS}, got {self.metric!r}")
        return self


# config-file / flag spellings that differ from the field names
_ALIASES = {"components": "n_components"}


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = kinds[name]
    if raw is None or isinstance(raw, bool):
        return raw
    if isinstance(raw, str) and raw.strip().lower() in ("", "none", "null"):
        return None
    if name == "exclude_same_camera":
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if kind in (int, Optional[int]):
        return int(raw)
    if kind in (float, Optional[float]):
        return float(raw)
    return str(raw).strip()


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    known = {f.name for f in fields(RunConfig)}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            key = _ALIASES.get(key, key)
            if key not in known:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _coerce(key, value)
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def build_config(args):
    """Defaults, then the config file, then explicit flags."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    return RunConfig(**merged).validate()


def _write_json(payload, out):
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _require(config, *names):
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigurationError(f"missing required option(s): {flags}")


def train(config, samples=None):
    """One pass over the training stream; write the model, return the report.

    ``samples`` overrides reading ``config.input`` (any iterable of
    :class:`~sketchda.formats.LabeledSample`).
    """
    if samples is None:
        _require(config, "input")
        samples = read_samples(config.input)
    _require(config, "model")
    start = time.perf_counter()
    od = None
    for s in samples:
        if od is None:
            od = OnlineDiscriminant(
                config.sketch_size,
                s.features.size,
                reduced_dim=config.reduced_dim,
                n_components=config.n_components,
                ridge=config.ridge,
            )
        od.observe(s.features, s.label)
    if od is None:
        raise SketchDAError("training stream is empty")
    model = od.finalize()
    elapsed = time.perf_counter() - start
    model.save(config.model)

    d, k, n_classes = model.dim, model.reduced_dim, od.stats.n_classes
    report = {
        "n_samples": od.stats.population_count,
        "n_classes": n_classes,
        "dim": d,
        "sketch_size": config.sketch_size,
        "reduced_dim": k,
        "n_components": model.n_components,
        "ridge": model.ridge,
        "shrink_mass": od.sketch.shrink_mass,
        "n_shrinks": od.sketch.n_shrinks,
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "state_bytes": od.nbytes + model.reduction.nbytes,
        "state_bytes_model": (2 * config.sketch_size + k + n_classes) * d * 8,
        "wall_time_s": elapsed,
    }
    return report


def run_eval(config):
    _require(config, "model", "query", "gallery")
    model = DiscriminantModel.load(config.model)
    qX, qy, qc = load_arrays(config.query)
    gX, gy, gc = load_arrays(config.gallery)
    if qX.shape[1] != model.dim or gX.shape[1] != model.dim:
        raise SketchDAError(
            f"model dim {model.dim} does not match query/gallery dims {qX.shape[1]}/{gX.shape[1]}"
        )
    use_cams = config.exclude_same_camera and qc is not None and gc is not None
    report = evaluate(
        model,
        qX,
        qy,
        gX,
        gy,
        metric=config.metric,
        query_cameras=qc if use_cams else None,
        gallery_cameras=gc if use_cams else None,
    )
    cmc_path = config.cmc_csv
    if cmc_path is None and config.out:
        cmc_path = str(Path(config.out).with_suffix(".cmc.csv"))
    if cmc_path:
        report.write_cmc_csv(cmc_path)
    for note in report.warnings:
        log.warning(note)
    return report


def run_verify(config):
    _require(config, "input")
    rows, labels = [], []
    od = None
    for s in read_samples(config.input):
        if od is None:
            od = OnlineDiscriminant(config.sketch_size, s.features.size)
        if (len(rows) + 1) * s.features.size > config.max_elements:
            raise SketchDAError(
                f"input exceeds the verification cap of {config.max_elements} stored values"
            )
        od.observe(s.features, s.label)
        rows.append(s.features)
        labels.append(s.label)
    if od is None:
        raise SketchDAError("verification stream is empty")
    b_plus, _ = od.sketch.finalize()
    scatters = approx_scatters(od.stats, b_plus)
    return verify_bounds(
        np.vstack(rows),
        np.array(labels),
        scatters,
        config.sketch_size,
        shrink_mass=od.sketch.shrink_mass,
        ridge=config.ridge,
        n_components=config.n_components,
        seed=config.seed,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="sketchda", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="key=value file; flags take precedence")
        p.add_argument("--sketch-size", dest="sketch_size", type=int)
        p.add_argument("--reduced-dim", dest="reduced_dim", type=int)
        p.add_argument("--components", dest="n_components", type=int)
        p.add_argument("--ridge", type=float)
        p.add_argument("--metric", choices=METRICS)
        p.add_argument("--seed", type=int)
        p.add_argument("--input")
        p.add_argument("--model")
        p.add_argument("--query")
        p.add_argument("--gallery")
        p.add_argument("--out")

    p = sub.add_parser("train", help="one-pass training from a feature file")
    common(p)

    p = sub.add_parser("eval", help="cross-view matching evaluation")
    common(p)
    p.add_argument("--cmc-csv", dest="cmc_csv")
    p.add_argument(
        "--exclude-same-camera", dest="exclude_same_camera", action="store_true", default=None
    )

    p = sub.add_parser("verify", help="check the sketch bounds against batch statistics")
    common(p)
    p.add_argument("--max-elements", dest="max_elements", type=int)

    p = sub.add_parser("synth", help="write synthetic train/query/gallery files")
    p.add_argument("--classes", type=int, default=50)
    p.add_argument("--per-class", dest="per_class", type=int, default=20)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--between-spread", dest="between_spread", type=float, default=4.0)
    p.add_argument("--within-spread", dest="within_spread", type=float, default=1.0)
    p.add_argument("--view-offset", dest="view_offset", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _dispatch(args):
    if args.command == "synth":
        data = make_two_view(
            args.classes,
            args.per_class,
            args.dim,
            between_spread=args.between_spread,
            within_spread=args.within_spread,
            view_offset=args.view_offset,
            seed=args.seed,
        )
        paths = write_splits(data, args.out, fmt=args.format)
        _write_json({name: str(p) for name, p in paths.items()}, None)
        return EXIT_OK

    config = build_config(args)
    if args.command == "train":
        report = train(config)
        _write_json(report, config.out)
        return EXIT_OK
    if args.command == "eval":
        report = run_eval(config)
        _write_json(report.to_dict(), config.out)
        return EXIT_OK
    if args.command == "verify":
        report = run_verify(config)
        _write_json(report.to_dict(), config.out)
        return EXIT_OK if report.all_pass else EXIT_VERIFY
    raise ConfigurationError(f"unknown command {args.command!r}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s"
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _dispatch(args)
    except ConfigurationError as exc:
        print(f"sketchda: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SketchDAError, OSError) as exc:
        print(f"sketchda: error: {exc}", file=sys.stderr)
        return EXIT_DATA
