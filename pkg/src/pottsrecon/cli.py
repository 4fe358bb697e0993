"""Command-line drivers: deblur, radon, segment and potts1d."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algo1 import Algo1Config, run_algo1
from .algo2 import LAMBDA_PRESETS, Algo2Config, run_algo2
from .core import build_direction_model
from .coupling import CouplingScheme, choose_t
from .evaluation import NoiseSpec, add_noise, mssim, shepp_logan
from .io import FormatError, read_image, write_labels, write_pgm, write_raw
from .operators import (
    RadonGeometry,
    fbp,
    gaussian_blur_operator,
    identity_operator,
    motion_blur_operator,
    radon_operator,
)
from .potts1d import solve_univariate
from .projection import project

EXIT_OK = 0
EXIT_IO = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64
EXIT_DATA = 65

logger = logging.getLogger("pottsrecon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(x):
    v = float(x)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return v


def _nonnegative(x):
    v = float(x)
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {x}")
    return v


def _add_solver_flags(p, coupling, lam_help):
    p.add_argument("--gamma", type=_positive, help="jump penalty")
    p.add_argument("--algo", type=int, choices=(1, 2), default=2)
    p.add_argument("--coupling", choices=("full", "cyclic"), default=coupling)
    p.add_argument("--directions", choices=("compass4", "knight8"), default="compass4")
    p.add_argument("--lambda", dest="lam", type=_positive, help=lam_help)
    p.add_argument("--epsilon", type=_positive, help="absolute nearness tolerance for --algo 1")
    p.add_argument("--epsilon-rel", type=_positive, default=0.01, help="nearness tolerance as a multiple of ||f|| (default 0.01)")
    p.add_argument("--max-iters", type=int, help="iteration cap (outer iterations for --algo 2)")
    p.add_argument("--inner-max", type=int, default=100_000, help="inner iteration cap for --algo 2")
    p.add_argument("--strict", action="store_true", help="--algo 1 without step relaxation")
    p.add_argument(
        "--prune", action=argparse.BooleanOptionalAction, default=False, help="exact pruning in the univariate solver"
    )
    p.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="--algo 2 on the equivalent problem with a unit-norm operator",
    )
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--noise", type=_nonnegative, default=0.0, help="Gaussian noise sigma added to the data")
    p.add_argument("--output-dir", type=Path, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pottsrecon", description="Potts-regularized image reconstruction.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, help="worker threads for compiled kernels (default: all cores)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("deblur", help="joint deblurring and partitioning")
    p.add_argument("--input", type=Path, required=True, help="PGM or raw grid")
    p.add_argument("--kernel", choices=("gaussian", "motion", "identity"), default="gaussian")
    p.add_argument("--kernel-size", type=_positive, default=3.0, help="Gaussian sigma or motion length in pixels")
    p.add_argument("--simulate", action="store_true", help="treat the input as ground truth and blur it first")
    p.add_argument("--preset", choices=("gauss3",), help="Gaussian sigma 3, full coupling, gamma 0.1")
    _add_solver_flags(p, "full", "step relaxation (default 0.4 for --algo 1, kernel preset for --algo 2)")

    p = sub.add_parser("radon", help="tomographic reconstruction from sparse angles")
    p.add_argument("--input", type=Path, help="phantom image; the Shepp-Logan phantom when omitted")
    p.add_argument("--size", type=int, default=128, help="phantom side length")
    p.add_argument("--angles", type=int, default=25)
    _add_solver_flags(p, "cyclic", "step relaxation (default 0.11)")
    p.set_defaults(gamma=3.0, noise=0.7, normalize=True, prune=True)

    p = sub.add_parser("segment", help="Potts segmentation (A = identity)")
    p.add_argument("--input", type=Path, required=True)
    _add_solver_flags(p, "full", "step relaxation (default 0.55)")

    p = sub.add_parser("potts1d", help="exact univariate Potts solve")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--signal", help="comma-separated values")
    src.add_argument("--input", type=Path, help="CSV file of values")
    p.add_argument("--gamma", type=_positive, required=True)
    p.add_argument("--prune", action="store_true")
    return parser


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _emit_metrics(out_dir: Path, metrics: dict):
    lines = [f"{k}={_fmt(v)}" for k, v in metrics.items()]
    (out_dir / "metrics.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def _write_manifest(out_dir: Path, args, extra: dict):
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    doc = {"version": __version__, "parameters": params, "derived": extra}
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _solve(A, f, args, lam_default, init=None):
    """Run the requested algorithm; returns (image, labels, trace, converged, derived)."""
    model = build_direction_model(args.directions)
    scheme = CouplingScheme.from_name(args.coupling, model.size)
    lam = args.lam if args.lam is not None else lam_default
    norm_A = A.norm
    norm_f = float(np.linalg.norm(f))
    derived = {"norm_A": norm_A, "norm_f": norm_f, "lambda": lam}
    if args.algo == 1:
        eps = args.epsilon if args.epsilon is not None else args.epsilon_rel * norm_f
        if eps == 0:
            eps = args.epsilon_rel
        kw = {} if args.max_iters is None else {"max_iters": args.max_iters}
        cfg = Algo1Config(
            gamma=args.gamma, epsilon=eps, scheme=scheme, model=model, lam=lam,
            strict_mode=args.strict, prune=args.prune, **kw,
        )
        stack, trace = run_algo1(A, f, cfg, init=init, norm_A=norm_A)
        image, partition = project(stack, model)
        derived.update(epsilon=eps, rho=trace.rho, L_rho=trace.L, iterations=len(trace) - 1)
        return image, partition.labels, trace, trace.converged, derived
    kw = {} if args.max_iters is None else {"outer_max": args.max_iters}
    cfg = Algo2Config(
        gamma=args.gamma, scheme=scheme, model=model, lam=lam,
        inner_max=args.inner_max, prune=args.prune, normalize=args.normalize, **kw,
    )
    image, trace = run_algo2(A, f, cfg, init=init, norm_A=norm_A)
    derived.update(
        t=trace.t,
        t_formula=choose_t(scheme, model.size, norm_A / trace.scale, norm_f / trace.scale),
        operator_scale=trace.scale,
        rho0=cfg.rho0, tau=cfg.tau, eta=cfg.eta,
        rho_final=trace.rho[-1] if trace.rho else None,
        L_rho_final=trace.L[-1] if trace.L else None,
        outer_iterations=len(trace), inner_iterations=int(sum(trace.n_inner)),
    )
    return image, trace.partition.labels, trace, trace.converged, derived


def _write_result(out_dir, image, labels, trace, name="reconstruction"):
    write_raw(out_dir / f"{name}.raw", image)
    write_pgm(out_dir / f"{name}.pgm", image)
    write_labels(out_dir / "labels.pgm", labels)
    trace.write_csv(out_dir / "trace.csv")


def cmd_deblur(args) -> int:
    if args.preset == "gauss3":
        args.kernel, args.kernel_size, args.coupling = "gaussian", 3.0, "full"
        if args.gamma is None:
            args.gamma = 0.1
        if args.algo == 1 and args.epsilon is None:
            args.epsilon_rel = 2.0
    if args.gamma is None:
        raise UsageError("--gamma is required")
    u_in = read_image(args.input)
    rows, cols = u_in.shape
    if args.kernel == "gaussian":
        A = gaussian_blur_operator(rows, cols, args.kernel_size)
    elif args.kernel == "motion":
        A = motion_blur_operator(rows, cols, int(round(args.kernel_size)))
    else:
        A = identity_operator(rows, cols)
    f = A.apply(u_in) if args.simulate else u_in
    f = add_noise(f, NoiseSpec(args.noise, args.seed))
    args.output_dir.mkdir(parents=True, exist_ok=True)
    write_raw(args.output_dir / "data.raw", f)
    lam_default = 0.4 if args.algo == 1 else LAMBDA_PRESETS.get(args.kernel, LAMBDA_PRESETS["gaussian"])
    image, labels, trace, converged, derived = _solve(A, f, args, lam_default)
    _write_result(args.output_dir, image, labels, trace)
    metrics = {"segments": int(labels.max()) + 1, "converged": int(converged)}
    if args.simulate:
        metrics["mssim"] = mssim(image, u_in)
    _emit_metrics(args.output_dir, metrics)
    _write_manifest(args.output_dir, args, derived)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_radon(args) -> int:
    if args.angles < 1:
        raise UsageError("--angles must be positive")
    if args.input is not None:
        x = read_image(args.input)
    else:
        if args.size < 16:
            raise UsageError("--size must be at least 16")
        x = shepp_logan(args.size)
    rows, cols = x.shape
    geom = RadonGeometry.for_image(rows, cols, args.angles)
    R = radon_operator(rows, cols, geom)
    f = add_noise(R.apply(x), NoiseSpec(args.noise, args.seed))
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_raw(out / "phantom.raw", x)
    write_raw(out / "sinogram.raw", f)
    rec_fbp = fbp(f, geom, (rows, cols))
    write_raw(out / "fbp.raw", rec_fbp)
    write_pgm(out / "fbp.pgm", rec_fbp)
    image, labels, trace, converged, derived = _solve(R, f, args, LAMBDA_PRESETS["radon"])
    _write_result(out, image, labels, trace, name="proposed")
    _emit_metrics(out, {
        "mssim_fbp": mssim(rec_fbp, x),
        "mssim_proposed": mssim(image, x),
        "segments": int(labels.max()) + 1,
        "converged": int(converged),
    })
    derived["num_detectors"] = geom.num_detectors
    _write_manifest(out, args, derived)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_segment(args) -> int:
    if args.gamma is None:
        raise UsageError("--gamma is required")
    f = add_noise(read_image(args.input), NoiseSpec(args.noise, args.seed))
    A = identity_operator(*f.shape)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    image, labels, trace, converged, derived = _solve(A, f, args, LAMBDA_PRESETS["segment"], init=f)
    _write_result(args.output_dir, image, labels, trace, name="segmentation")
    _emit_metrics(args.output_dir, {"segments": int(labels.max()) + 1, "converged": int(converged)})
    _write_manifest(args.output_dir, args, derived)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def parse_signal(text: str) -> np.ndarray:
    tokens = [t for t in text.replace("\n", ",").split(",") if t.strip()]
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise FormatError(f"cannot parse signal: {exc}") from None
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise FormatError("signal must contain finite values")
    return values


def cmd_potts1d(args) -> int:
    text = args.signal if args.signal is not None else args.input.read_text()
    seg = solve_univariate(parse_signal(text), args.gamma, prune=args.prune)
    bps = ",".join(str(b) for b in seg.breakpoints)
    levels = ",".join(repr(float(v)) for v in seg.levels)
    print(f"breakpoints={bps} levels={levels} energy={seg.energy!r}")
    return EXIT_OK


COMMANDS = {"deblur": cmd_deblur, "radon": cmd_radon, "segment": cmd_segment, "potts1d": cmd_potts1d}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None:
        import numba

        if not 1 <= args.threads <= numba.config.NUMBA_NUM_THREADS:
            print(f"pottsrecon: --threads must lie in [1, {numba.config.NUMBA_NUM_THREADS}]", file=sys.stderr)
            return EXIT_USAGE
        numba.set_num_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"pottsrecon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"pottsrecon: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"pottsrecon: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"pottsrecon: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
