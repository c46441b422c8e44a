"""``axvar`` command line: kernels, simulate, deconvolve, verify, bmode, metrics.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

import argparse
import logging
import math
import sys
import time
import typing
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels, phantom, verify
from .axial_model import AxialKernelStack, ForwardModel, simulate
from .formats import FormatError, read_tensor, write_pgm, write_tensor
from .padding import DEFAULT_PAD_MODE, PadMode
from .solver import DEFAULT_ITERATIONS, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, SolverConfig, deconvolve

log = logging.getLogger("axvar")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2

# name -> (m_t, n_t, m_r, n_r, upsample)
PRESETS = {
    "trf1": phantom.REFERENCE_SIZES["trf1"] + (2,),
    "trf2": phantom.REFERENCE_SIZES["trf2"] + (2,),
    "trf3": phantom.REFERENCE_SIZES["trf3"] + (2,),
    "desk": (256, 128, 5, 12, 2),
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to regenerate a simulation or a reconstruction."""

    trf: str = "desk"              # preset name or path to a tensor file
    rows: Optional[int] = None
    cols: Optional[int] = None
    upsample: Optional[int] = None
    amplitude: float = phantom.GRAY_LEVELS
    m_r: Optional[int] = None
    n_r: Optional[int] = None
    f0: float = phantom.F0_HZ
    fs: float = phantom.FS_HZ
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    pad_mode: str = DEFAULT_PAD_MODE.value
    snr_db: float = 40.0
    seed: int = 0
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    iters: int = DEFAULT_ITERATIONS
    tol: Optional[float] = None
    invariant_kernel: Optional[int] = None
    rf: Optional[str] = None
    kernels: Optional[str] = None

    def resolved(self) -> "ExperimentConfig":
        """Fill size fields from the preset when not given explicitly."""
        out = ExperimentConfig(**asdict(self))
        if self.trf in PRESETS:
            m_t, n_t, m_r, n_r, up = PRESETS[self.trf]
            out.rows = out.rows or m_t
            out.cols = out.cols or n_t
            out.m_r = m_r if out.m_r is None else out.m_r
            out.n_r = n_r if out.n_r is None else out.n_r
            out.upsample = out.upsample or up
        out.upsample = out.upsample or 1
        return out

    def kernel_params(self, m_t: int) -> phantom.KernelParams:
        return phantom.KernelParams(
            m_t=m_t, m_r=self.m_r, n_r=self.n_r, f0=self.f0, fs=self.fs,
            sigma1=self.sigma1, sigma2=self.sigma2,
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(lambda1=self.lambda1, lambda2=self.lambda2, max_iters=self.iters, tol=self.tol)

    def to_manifest(self, **extra) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in asdict(self).items()]
        lines += [f"# {k}={_fmt(v)}" for k, v in extra.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            if key not in types:
                raise UsageError(f"unknown manifest key {key!r}")
            values[key] = _parse(raw, types[key])
        return cls(**values)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, typ):
    if raw == "none":
        return None
    base = next((a for a in typing.get_args(typ) if a is not type(None)), typ)
    return base(raw)


# -- commands -------------------------------------------------------------


def cmd_kernels(args) -> int:
    if args.trf:
        m_t, _, m_r, n_r, _ = PRESETS[args.trf]
    else:
        m_t, m_r, n_r = args.m_t, args.m_r, args.n_r
    m_t = args.m_t or m_t
    m_r = m_r if args.m_r is None else args.m_r
    n_r = n_r if args.n_r is None else args.n_r
    if m_t is None or m_r is None or n_r is None:
        raise UsageError("kernels needs --trf or all of --m-t, --m-r, --n-r")
    p = phantom.KernelParams(m_t=m_t, m_r=m_r, n_r=n_r, f0=args.f0, fs=args.fs,
                             sigma1=args.sigma1, sigma2=args.sigma2)
    stack = phantom.make_stack(p)
    write_tensor(args.out, stack.kernels, tag="kernel-stack", extra={
        "m_r": m_r, "n_r": n_r, "f0": repr(p.f0), "fs": repr(p.fs),
        "sigma1": repr(p.sigma1), "sigma2": repr(p.sigma2),
    })
    print(f"wrote {args.out} dims={list(stack.kernels.shape)}")
    if args.preview:
        write_pgm(args.preview, phantom.kernel_preview(stack))
        print(f"wrote {args.preview}")
    return EXIT_OK


def load_trf(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.trf in PRESETS:
        imap = phantom.synthetic_map(cfg.rows, cfg.cols)
        spec = phantom.TrfSpec(cfg.rows, cfg.cols, imap, seed=cfg.seed,
                               upsample=cfg.upsample, amplitude=cfg.amplitude)
        return phantom.make_trf(spec)
    tf = read_tensor(cfg.trf)
    if tf.tag == "map":
        rows, cols = tf.data.shape
        return phantom.make_trf(phantom.TrfSpec(rows, cols, tf.data, seed=cfg.seed,
                                                upsample=cfg.upsample, amplitude=cfg.amplitude))
    if tf.data.ndim != 2:
        raise UsageError(f"{cfg.trf}: expected a 2D TRF or intensity map")
    return tf.data


def run_simulation(cfg: ExperimentConfig):
    """Returns (trf, rf, stack) for a resolved config."""
    x = load_trf(cfg)
    m_t, n_t = x.shape
    if cfg.m_r is None or cfg.n_r is None:
        raise UsageError("kernel radii --m-r/--n-r are required for a TRF file")
    stack = phantom.make_stack(cfg.kernel_params(m_t))
    model = ForwardModel(stack, n_t, cfg.pad_mode)
    y = simulate(model, x, cfg.snr_db, seed=[cfg.seed, 1])
    return x, y, stack


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    x, y, stack = run_simulation(cfg)
    elapsed = time.perf_counter() - t0
    write_tensor(out / "trf.axim", x, tag="trf")
    write_tensor(out / "rf.axim", y, tag="rf")
    write_tensor(out / "kernels.axim", stack.kernels, tag="kernel-stack")
    cfg.rf = str(out / "rf.axim")
    cfg.kernels = str(out / "kernels.axim")
    (out / "manifest.txt").write_text(cfg.to_manifest(command="simulate", seconds=round(elapsed, 3)))
    print(f"simulated {x.shape[0]}x{x.shape[1]} in {elapsed:.3f}s -> {out}")
    return EXIT_OK


def run_deconvolution(cfg: ExperimentConfig, y=None, stack=None):
    if y is None:
        y = read_tensor(cfg.rf).data
    if stack is None:
        stack = AxialKernelStack(read_tensor(cfg.kernels).data)
    if cfg.invariant_kernel is not None:
        row = cfg.invariant_kernel
        if not 1 <= row <= stack.m_t:
            raise UsageError(f"--invariant-kernel {row} outside 1..{stack.m_t}")
        stack = AxialKernelStack.constant(stack.kernel(row), stack.m_t)
    if y.ndim != 2 or y.shape[0] != stack.m_t:
        raise UsageError(f"observation {y.shape} does not match {stack.m_t} kernel rows")
    model = ForwardModel(stack, y.shape[1], cfg.pad_mode)
    return deconvolve(model, y, cfg.solver_config())


def cmd_deconvolve(args) -> int:
    cfg = _config_from_args(args)
    if cfg.rf is None or cfg.kernels is None:
        raise UsageError("deconvolve needs --rf and --kernels (or a manifest naming them)")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = run_deconvolution(cfg)
    elapsed = time.perf_counter() - t0
    write_tensor(out / "reconstruction.axim", report.x, tag="reconstruction")
    report.write_trace_csv(out / "trace.csv")
    (out / "manifest.txt").write_text(cfg.to_manifest(command="deconvolve", seconds=round(elapsed, 3)))
    print(f"{report.iterations_run} iterations in {elapsed:.2f}s, "
          f"objective {report.initial_objective:.6g} -> {report.objective_trace[-1]:.6g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_suite(seed=args.seed, scale=args.scale)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("ALL PASSED" if ok else "VERIFICATION FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bmode(args) -> int:
    tf = read_tensor(args.input)
    if tf.data.ndim != 2:
        raise UsageError("bmode needs a 2D image")
    write_pgm(args.out, phantom.bmode_render(tf.data, args.dr))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref = read_tensor(args.ref).data
    est = read_tensor(args.est).data
    print(f"nrmse={phantom.nrmse(ref, est):.6g} psnr={phantom.psnr(ref, est):.4f}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _snr(value: str) -> float:
    if value.lower() in ("inf", "none", "off"):
        return math.inf
    return float(value)


def _row(value: str):
    return value if value == "center" else int(value)


def _add_kernel_flags(p, radii_default=None):
    p.add_argument("--m-r", type=int, default=radii_default)
    p.add_argument("--n-r", type=int, default=radii_default)
    p.add_argument("--f0", type=float, default=phantom.F0_HZ, help="centre frequency [Hz]")
    p.add_argument("--fs", type=float, default=phantom.FS_HZ, help="sampling frequency [Hz]")
    p.add_argument("--sigma1", type=float, help="axial SD in pixels (default m_r/3)")
    p.add_argument("--sigma2", type=float, help="maximal lateral SD in pixels (default n_r/3)")


def _add_runtime_flags(p):
    p.add_argument("--threads", type=int, help="bound operator worker threads")
    p.add_argument("--deterministic", action="store_true",
                   help="bit-reproducible reductions (always the case for these operators)")


def _config_from_args(args) -> ExperimentConfig:
    if getattr(args, "from_manifest", None):
        return ExperimentConfig.from_manifest(Path(args.from_manifest).read_text()).resolved()
    cfg = ExperimentConfig()
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if getattr(args, "no_noise", False):
        cfg.snr_db = math.inf
    cfg = cfg.resolved()
    if cfg.invariant_kernel == "center":
        # the kernel file is authoritative; preset sizes may not match it
        m_t = read_tensor(cfg.kernels).data.shape[0] if cfg.kernels else cfg.rows
        cfg.invariant_kernel = max(1, m_t // 2)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axvar", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernels", help="generate a depth-dependent kernel stack")
    k.add_argument("--trf", choices=sorted(PRESETS), help="take m_t and radii from a preset")
    k.add_argument("--m-t", type=int)
    _add_kernel_flags(k)
    k.add_argument("--out", required=True)
    k.add_argument("--preview", help="also write a PGM strip of envelope kernels at 20 depths")
    k.set_defaults(func=cmd_kernels)

    s = sub.add_parser("simulate", help="generate a TRF and its RF image")
    s.add_argument("--trf", help=f"preset ({', '.join(sorted(PRESETS))}) or tensor file")
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--upsample", type=int, help="scatterer interpolation factor")
    s.add_argument("--amplitude", type=float,
                   help=f"scatterer SD for a map value of 1 (default {phantom.GRAY_LEVELS:g})")
    _add_kernel_flags(s)
    s.add_argument("--pad-mode", choices=[m.value for m in PadMode])
    s.add_argument("--snr-db", type=_snr)
    s.add_argument("--no-noise", action="store_true")
    s.add_argument("--seed", type=int)
    s.add_argument("--from-manifest")
    s.add_argument("--out-dir", required=True)
    _add_runtime_flags(s)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("deconvolve", help="elastic-net deconvolution of an RF image")
    d.add_argument("--rf")
    d.add_argument("--kernels")
    d.add_argument("--pad-mode", choices=[m.value for m in PadMode])
    d.add_argument("--lambda1", type=float)
    d.add_argument("--lambda2", type=float)
    d.add_argument("--iters", type=int)
    d.add_argument("--tol", type=float)
    d.add_argument("--invariant-kernel", type=_row, metavar="ROW",
                   help="use kernel ROW (1-based, or 'center') at every depth")
    d.add_argument("--from-manifest")
    d.add_argument("--out-dir", required=True)
    _add_runtime_flags(d)
    d.set_defaults(func=cmd_deconvolve)

    v = sub.add_parser("verify", help="run the randomized identity suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", type=int, default=1, help="multiply instance counts")
    _add_runtime_flags(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bmode", help="render a tensor file as a B-mode PGM")
    b.add_argument("input")
    b.add_argument("--dr", type=float, default=40.0, help="dynamic range [dB]")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bmode)

    m = sub.add_parser("metrics", help="NRMSE and PSNR of an estimate")
    m.add_argument("ref")
    m.add_argument("est")
    m.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None:
        _kernels.set_threads(args.threads)
    try:
        return args.func(args)
    except (UsageError, FormatError, OSError, ValueError) as exc:
        print(f"axvar {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
