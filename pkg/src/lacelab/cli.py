"""Command-line entry point: ``lacelab <subcommand> ...``.

Every run writes a JSON manifest (command line, parsed configuration, seed,
version and SHA-256 of each output) so it can be repeated exactly.
Exit codes: 0 success, 1 a checked claim failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .algebra import expand, parse_point
from .bounds import BOUND_NAMES, check_named_bound, parse_grid
from .dgf import parse_dgf_many, read_dgf, write_dgf_many
from .diag import DiagEvaluator
from .enumeration import enumerate_admissible
from .errors import InvariantBroken, LacelabError
from .graph import canonical_key, key_hex
from .kernels import KernelModel, LatticeBox
from .percolation import PercLattice, PercParams, estimate
from .reduction import K23, TRIANGLE, reduce_to_fixpoint

DEFAULT_MANIFEST = "lacelab-manifest.json"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(x) -> str:
    """Floats with 12 significant digits, everything else via ``str``."""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


@dataclass
class RunManifest:
    argv: list[str]
    config: dict
    seed: int | None
    version: str = __version__
    outputs: dict[str, str] = field(default_factory=dict)

    def record(self, name: str, data: bytes):
        self.outputs[name] = hashlib.sha256(data).hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "argv": self.argv,
                "config": self.config,
                "seed": self.seed,
                "version": self.version,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


class _Run:
    """Output sink for one subcommand: stdout or ``--out``, plus checksums."""

    def __init__(self, args, manifest: RunManifest):
        self.args = args
        self.manifest = manifest
        self.buf = io.StringIO()

    def write(self, text: str):
        self.buf.write(text)

    def csv(self, header: Sequence[str], rows: Sequence[Sequence]):
        w = csv.writer(self.buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])

    def finish(self):
        text = self.buf.getvalue()
        out = getattr(self.args, "out", None)
        if out:
            Path(out).write_text(text, encoding="utf-8")
            self.manifest.record(str(out), text.encode("utf-8"))
        else:
            sys.stdout.write(text)
            self.manifest.record("<stdout>", text.encode("utf-8"))


# ---------------------------------------------------------------------------
# helpers


def _model(args) -> KernelModel:
    if getattr(args, "tau_csv", None):
        return KernelModel.from_csv(args.tau_csv, d=args.dim)
    return KernelModel(args.dim, args.alpha)


def _points(text: str) -> list[tuple[int, ...]]:
    return [parse_point(t) for t in text.split(";") if t.strip()]


def _pairs(text: str) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """``(a)|(b);(c)|(d)`` or an even-length list ``(a);(b);(c);(d)``."""
    if "|" in text:
        out = []
        for part in text.split(";"):
            if part.strip():
                a, b = part.split("|")
                out.append((parse_point(a), parse_point(b)))
        return out
    pts = _points(text)
    if len(pts) % 2:
        raise ValueError("sigma targets come in pairs")
    return list(zip(pts[::2], pts[1::2]))


def _add_kernel(p: argparse.ArgumentParser, radius: int):
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--alpha", type=float, default=2.5)
    p.add_argument("--tau-csv", help="empirical kernel table x1,...,xd,value")
    p.add_argument("--radius", type=int, default=radius)


def _add_out(p: argparse.ArgumentParser):
    p.add_argument("--out", help="write the main output here instead of stdout")


# ---------------------------------------------------------------------------
# subcommands


def cmd_reduce(args, run: _Run) -> int:
    code = EXIT_OK
    graphs = parse_dgf_many(Path(args.graph).read_text(encoding="utf-8"))
    rng = random.Random(args.seed) if args.seed is not None else None
    for i, G in enumerate(graphs):
        if len(graphs) > 1:
            run.write(f"graph {i}\n")
        _, trace = reduce_to_fixpoint(G, args.anchors, rng=rng)
        run.write("\n".join(trace.lines()) + "\n")
    return code


def cmd_enumerate(args, run: _Run) -> int:
    graphs = enumerate_admissible(args.k, dim=args.dim)
    run.write(write_dgf_many(graphs))
    print(f"k={args.k}: {len(graphs)} admissible graphs", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args, run: _Run) -> int:
    ok = True
    run.write(f"certificate superreduc max-internal {args.max_internal} dim {args.dim}\n")
    for k in range(0, args.max_internal + 1, 2):
        graphs = enumerate_admissible(k, dim=args.dim)
        run.write(f"k {k} count {len(graphs)}\n")
        for i, G in enumerate(graphs):
            _, trace = reduce_to_fixpoint(G)
            cls = trace.final_class
            ok &= cls in (TRIANGLE, K23)
            key = key_hex(canonical_key(G, exchangeable=G.marked))
            run.write(f"graph k {k} index {i} key {key} steps {len(trace.steps)} class {cls}\n")
    run.write(f"result {'ok' if ok else 'FAILED'}\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_diag(args, run: _Run) -> int:
    model = _model(args)
    if args.script:
        fam = expand(Path(args.graph).read_text(encoding="utf-8"), base_dir=Path(args.graph).parent)
        graphs = list(fam.members)
    else:
        graphs = parse_dgf_many(Path(args.graph).read_text(encoding="utf-8"))
    ev = DiagEvaluator(model, LatticeBox(args.radius, model.d), max_arity=args.max_arity, mem_budget=args.mem_budget)
    rows = []
    total = 0.0
    for i, G in enumerate(graphs):
        v = ev(G)
        total += v
        rows.append((i, key_hex(canonical_key(G)), v, args.radius))
    if args.script or args.sum:
        rows.append(("sum", "", total, args.radius))
    run.csv(("graph", "key", "value", "R"), rows)
    return EXIT_OK


def cmd_bounds(args, run: _Run) -> int:
    model = _model(args)
    params: dict = {"model": model, "R": args.radius, "factor": args.factor}
    names = ("x", "x'") if args.name in ("triangle_plus", "extra_diag") else ("u", "u'")
    if args.graph:
        params["graph"] = read_dgf(args.graph)
    if args.grid:
        if args.name == "neglect_w":
            params["grid"] = [{"u": p} for p in _points(args.grid)]
        else:
            params["grid"] = parse_grid(args.grid, model.d, names)
    if args.edge:
        params["edge"] = tuple(args.edge.split("-"))
    if args.W:
        params["W"] = _points(args.W)
    if args.N is not None:
        params["N"] = args.N
    if args.kernel:
        params["kernel"] = args.kernel
        params["L"] = args.L
        params["kernels"] = [(args.kernel, args.L)]
    if args.tol is not None:
        params["tol"] = args.tol
    if args.name in ("kill_bill", "neglect_w", "hreduction") and "graph" not in params:
        raise ValueError(f"--graph is required for {args.name}")
    rep = check_named_bound(args.name, params)
    rows = rep.rows()
    pkeys = [k for k in rows[0] if k not in ("name", "lhs", "rhs", "ratio", "R")]
    run.csv(["name", *pkeys, "lhs", "rhs", "ratio", "R"], [[r[k] for k in ["name", *pkeys, "lhs", "rhs", "ratio", "R"]] for r in rows])
    print(rep.summary(), file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_mc(args, run: _Run) -> int:
    if args.lo or args.hi:
        lo = parse_point(args.lo)
        hi = parse_point(args.hi)
        lat = PercLattice(lo, hi, args.kernel, args.L)
    else:
        lat = PercLattice.cube(args.dim, args.radius, args.kernel, args.L)
    params = PercParams(lat, args.p, args.seed)
    targets = _points(args.targets) if args.quantity == "tau" else _pairs(args.targets)
    ests = estimate(args.quantity, targets, params, args.samples, margin=args.margin)
    rows = []
    bk_ok = True
    for e in ests:
        tgt = ";".join("(" + ",".join(map(str, t)) + ")" for t in (e.target if args.quantity == "sigma" else (e.target,)))
        rows.append((e.quantity, tgt, float(e.value), float(e.stderr), e.samples, e.seed))
        if args.quantity == "sigma":
            prod = e.params["tau_x"] * e.params["tau_x2"]
            bk_ok &= e.value <= prod + 3 * e.stderr
    run.csv(("quantity", "target", "value", "stderr", "samples", "seed"), rows)
    if args.check_bk and not bk_ok:
        print("BK check failed: sigma exceeds tau*tau + 3 SE", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_expand(args, run: _Run) -> int:
    path = Path(args.script)
    fam = expand(path.read_text(encoding="utf-8"), base_dir=path.parent)
    run.write(write_dgf_many(fam.members))
    print(f"{len(fam)} members ({fam.raw_count} before dedup)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lacelab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"lacelab {__version__}")
    ap.add_argument("--manifest", default=DEFAULT_MANIFEST, help="where to write the run manifest")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="H-reduce a graph to its fixpoint and print the trace")
    p.add_argument("graph")
    p.add_argument("--anchors", nargs=3, metavar="ID")
    p.add_argument("--seed", type=int, help="randomise the choice among strong edges")
    _add_out(p)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("enumerate", help="write all admissible graphs with k internal vertices")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dim", type=int, default=3)
    _add_out(p)
    p.set_defaults(fn=cmd_enumerate)

    p = sub.add_parser("verify-superreduc", help="reduce every admissible graph and certify the classes")
    p.add_argument("--max-internal", type=int, default=4)
    p.add_argument("--dim", type=int, default=3)
    _add_out(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("diag-eval", help="evaluate diagram values on a box")
    p.add_argument("graph", help="DGF file (one or more blocks) or ops-script with --script")
    p.add_argument("--script", action="store_true", help="treat the input as an ops-script")
    p.add_argument("--sum", action="store_true", help="append the sum of all values")
    _add_kernel(p, radius=8)
    p.add_argument("--max-arity", type=int, default=2)
    p.add_argument("--mem-budget", type=float, default=1.5e9)
    _add_out(p)
    p.set_defaults(fn=cmd_diag)

    p = sub.add_parser("check-bounds", help="measure a named bound on a grid")
    p.add_argument("--name", required=True, choices=BOUND_NAMES)
    p.add_argument("--graph")
    p.add_argument("--grid", help="axis:2,4,8 or (u)|(u');... (points ; separated for neglect_w)")
    p.add_argument("--edge", help="edge a-b for hreduction")
    p.add_argument("--W", help="W set as (w);(w')...")
    p.add_argument("--N", type=int, help="series length for aass")
    p.add_argument("--kernel", choices=("nn", "spread"))
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--tol", type=float)
    _add_kernel(p, radius=8)
    _add_out(p)
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("mc", help="Monte Carlo estimates of tau or sigma")
    p.add_argument("quantity", choices=("tau", "sigma"))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--kernel", choices=("nn", "spread"), default="nn")
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--radius", type=int, default=32)
    p.add_argument("--lo", help="box corner, overrides --radius")
    p.add_argument("--hi", help="box corner, overrides --radius")
    p.add_argument("--targets", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=2.0)
    p.add_argument("--check-bk", action="store_true", help="exit 1 if sigma > tau*tau + 3 SE")
    _add_out(p)
    p.set_defaults(fn=cmd_mc)

    p = sub.add_parser("expand", help="run an ops-script and write the generalized diagram")
    p.add_argument("script")
    _add_out(p)
    p.set_defaults(fn=cmd_expand)
    return ap


def _config(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "fn":
            continue
        out[k] = v if isinstance(v, (int, float, str, bool, type(None), list)) else str(v)
    return out


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    manifest = RunManifest(argv=argv, config=_config(args), seed=getattr(args, "seed", None))
    run = _Run(args, manifest)
    try:
        code = args.fn(args, run)
    except InvariantBroken as exc:
        print(f"lacelab {args.command}: invariant broken: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    except (LacelabError, ValueError, KeyError, OSError) as exc:
        print(f"lacelab {args.command}: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    else:
        run.finish()
    manifest.config["exit_code"] = code
    try:
        Path(args.manifest).write_text(manifest.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"lacelab: cannot write manifest: {exc}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
