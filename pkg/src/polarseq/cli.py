"""Command line interface: simulation, code construction and inspection."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import report
from .bsda import penalty_profile
from .codespec import (
    CodeSpec,
    attach_crc,
    ebch_check_matrix,
    from_check_matrix,
    load_spec,
    make_polar_spec,
    save_spec,
)
from .decomposition import TreePolicy, build_tree
from .sim import Campaign, read_csv, run_campaign, write_csv, write_json


def _load_spec_file(path: str) -> CodeSpec:
    with open(path) as fh:
        return load_spec(fh.read())


def _parse_snrs(text: str) -> tuple[float, ...]:
    if ":" in text:
        lo, step, hi = (float(x) for x in text.split(":"))
        count = int(round((hi - lo) / step)) + 1
        return tuple(round(lo + i * step, 6) for i in range(count))
    return tuple(float(x) for x in text.split(","))


_POLICY_KEYS = {
    "spc": "max_spc", "rate1": "max_rate1", "dpc": "max_dpc",
    "rm1": "max_rm1", "cosets": "max_coset_extras", "leaf": "max_leaf",
    "repconcat": "allow_rep_concat",
}


def _parse_policy(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        if key not in _POLICY_KEYS:
            raise SystemExit(f"unknown tree-policy key {key!r}")
        field = _POLICY_KEYS[key]
        if field == "allow_rep_concat":
            out[field] = bool(int(val))
        elif field == "max_leaf":
            out[field] = int(val) if int(val) > 0 else None
        else:
            out[field] = int(val)
    return out


def _load_bias_file(path: str) -> tuple[float, ...]:
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("PSIPROFILE") or line.startswith("N "):
                continue
            phase, value = line.split()
            values[int(phase)] = float(value)
    return tuple(values[i] for i in range(len(values)))


def cmd_simulate(args) -> int:
    camp = Campaign(
        spec_text=open(args.code).read(),
        decoder=args.decoder,
        snrs=_parse_snrs(args.snr),
        L=args.L,
        D=args.D,
        pool_capacity=getattr(args, "lambda"),
        crc=int(args.crc, 16) if args.crc else None,
        max_frames=args.max_frames,
        target_errors=args.target_errors,
        seed=args.seed,
        workers=args.workers,
        tree_policy=_parse_policy(args.tree_policy),
        bias_snr_db=args.design_snr,
        bias_profile=_load_bias_file(args.bias_file) if args.bias_file else None,
    )
    points = run_campaign(camp)
    if args.format == "json":
        write_json(camp, points, args.out)
    else:
        write_csv(points, args.out)
    print(f"wrote {args.out}")
    if args.plot:
        rows = [vars(p) for p in points]
        stem, _ = os.path.splitext(args.out)
        name = f"{args.decoder} L={args.L}"
        print("wrote", report.render_error_rates(rows, stem + "_fer.png", name))
        print("wrote", report.render_complexity(rows, stem + "_ops.png", name))
    return 0


def cmd_encode(args) -> int:
    spec = _load_spec_file(args.code)
    if args.info:
        bits = np.array([int(b) for b in args.info], dtype=np.uint8)
    else:
        rng = np.random.default_rng(args.seed)
        bits = rng.integers(0, 2, spec.k, dtype=np.uint8)
        print("info    " + "".join(map(str, bits)))
    word = spec.encode(bits)
    print("codeword " + "".join(map(str, word)))
    return 0


def cmd_construct(args) -> int:
    if args.kind == "polar":
        spec = make_polar_spec(args.m, args.k, args.design_snr)
    elif args.kind == "ebch":
        spec = from_check_matrix(ebch_check_matrix(args.m, args.distance))
    else:
        base = _load_spec_file(args.code)
        spec = attach_crc(base, int(args.poly, 16), args.design_snr)
    text = save_spec(spec)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({spec.n},{spec.k})")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bias(args) -> int:
    spec = _load_spec_file(args.code)
    profile = penalty_profile(spec, args.snr, args.samples, seed=args.seed)
    with open(args.out, "w") as fh:
        fh.write(f"PSIPROFILE 1\nN {spec.n}\n")
        for phase, value in enumerate(profile):
            fh.write(f"{phase} {value:.6f}\n")
    print(f"wrote {args.out}")
    return 0


def cmd_dump_tree(args) -> int:
    spec = _load_spec_file(args.code)
    tree = build_tree(spec, TreePolicy(**_parse_policy(args.tree_policy)))
    sys.stdout.write(tree.dump())
    phis = ", ".join(str(leaf.phi_end) for leaf in tree.leaves)
    print(f"# {tree.num_leaves} leaves, block-end phases: {phis}")
    return 0


def cmd_plot(args) -> int:
    rows = read_csv(args.infile)
    stem = args.prefix or os.path.splitext(args.infile)[0]
    print("wrote", report.render_error_rates(rows, stem + "_fer.png", args.title))
    print("wrote", report.render_complexity(rows, stem + "_ops.png", args.title))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarseq",
                                 description="Block sequential decoding toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo FER/BER measurement")
    sim.add_argument("--code", required=True)
    sim.add_argument("--decoder", default="bsda",
                     choices=["sc", "scl", "sda", "bsda", "ml"])
    sim.add_argument("--L", type=int, default=32)
    sim.add_argument("--D", type=int, default=None)
    sim.add_argument("--lambda", type=int, default=None,
                     help="array pool capacity (entries)")
    sim.add_argument("--snr", required=True, help="lo:step:hi or comma list")
    sim.add_argument("--design-snr", type=float, default=None,
                     help="estimate the bias at this SNR instead of per point")
    sim.add_argument("--bias-file", default=None)
    sim.add_argument("--max-frames", type=int, default=1_000_000)
    sim.add_argument("--target-errors", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.add_argument("--crc", default=None, help="CRC polynomial, hex")
    sim.add_argument("--tree-policy", default=None)
    sim.add_argument("--plot", action="store_true",
                     help="render FER and complexity figures next to the output")
    sim.set_defaults(fn=cmd_simulate)

    enc = sub.add_parser("encode", help="encode an information vector")
    enc.add_argument("--code", required=True)
    enc.add_argument("--info", default=None, help="bit string; random if omitted")
    enc.add_argument("--seed", type=int, default=0)
    enc.set_defaults(fn=cmd_encode)

    con = sub.add_parser("construct", help="build and save a code spec")
    con.add_argument("kind", choices=["polar", "ebch", "crc"])
    con.add_argument("--m", type=int)
    con.add_argument("--k", type=int)
    con.add_argument("--design-snr", type=float, default=2.0)
    con.add_argument("--distance", type=int, help="eBCH designed distance")
    con.add_argument("--code", help="base spec for kind=crc")
    con.add_argument("--poly", default="0x107", help="CRC polynomial, hex")
    con.add_argument("--out", default=None)
    con.set_defaults(fn=cmd_construct)

    bias = sub.add_parser("bias", help="estimate the per-phase bias profile")
    bias.add_argument("--code", required=True)
    bias.add_argument("--snr", type=float, required=True)
    bias.add_argument("--samples", type=int, default=1_000_000)
    bias.add_argument("--seed", type=int, default=0)
    bias.add_argument("--out", required=True)
    bias.set_defaults(fn=cmd_bias)

    dt = sub.add_parser("dump-tree", help="print the decomposition tree")
    dt.add_argument("--code", required=True)
    dt.add_argument("--tree-policy", default=None)
    dt.set_defaults(fn=cmd_dump_tree)

    pl = sub.add_parser("plot", help="render figures from a results CSV")
    pl.add_argument("infile")
    pl.add_argument("--prefix", default=None)
    pl.add_argument("--title", default="")
    pl.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
