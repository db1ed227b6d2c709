"""Plain-text matrix cache: the exchange format between the assemble step
and every downstream command.

Line-oriented and diff-able. ``#`` lines are comments, then any of:

    model <n_lines>            the network model text, verbatim
    meta ports <a,b|->         port (non-reference electrode) names
    meta sources <a,b|->       free source-coil names
    meta basis <n_cycles> <n_paths>
    matrix <NAME> <rows> <cols> <i|f>

followed by the rows. A full cache carries R_I, L_I, R_D, L_D, M0, E, K,
LIFT and W; a minimal external cache carries R_X, L_X and E only and is
reduced on load through the exact integer kernel of E.
"""
from __future__ import annotations

import numpy as np

from . import linalg
from .assembly import CurrentBasis
from .errors import ParseError
from .network import LoopNetwork, parse_model, serialize_model
from .reduction import ReducedModel, project_external


def _write_matrix(fh, name: str, m: np.ndarray, integer: bool):
    m = np.atleast_2d(m)
    kind = "i" if integer else "f"
    fh.write(f"matrix {name} {m.shape[0]} {m.shape[1]} {kind}\n")
    for row in m:
        if integer:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
        else:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_cache(path, rm: ReducedModel, net: LoopNetwork | None = None,
                e: np.ndarray | None = None,
                header_lines: tuple[str, ...] = ()):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        if net is not None:
            text = serialize_model(net)
            lines = text.splitlines()
            fh.write(f"model {len(lines)}\n")
            for line in lines:
                fh.write(line + "\n")
        fh.write(f"meta ports {','.join(rm.port_names) or '-'}\n")
        fh.write(f"meta sources {','.join(rm.source_names) or '-'}\n")
        _write_matrix(fh, "R_I", rm.r_i.full, False)
        _write_matrix(fh, "L_I", rm.l_i.full, False)
        _write_matrix(fh, "R_D", rm.r_d, False)
        _write_matrix(fh, "L_D", rm.l_d, False)
        _write_matrix(fh, "M0", rm.m0, False)
        _write_matrix(fh, "LIFT", rm.lift, False)
        _write_matrix(fh, "K", rm.k, False)
        if e is not None:
            _write_matrix(fh, "E", e, True)
        if rm.basis is not None:
            fh.write(f"meta basis {rm.basis.n_cycles} {rm.basis.n_paths}\n")
            _write_matrix(fh, "W", rm.basis.w, True)


def read_cache(path) -> tuple[ReducedModel, LoopNetwork | None]:
    """Load a cache; minimal R_X/L_X/E caches are reduced on the fly."""
    matrices: dict[str, np.ndarray] = {}
    meta: dict[str, list[str]] = {}
    model_text: str | None = None
    basis_counts: tuple[int, int] | None = None

    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if toks[0] == "model":
            count = int(toks[1])
            model_text = "\n".join(lines[i:i + count]) + "\n"
            i += count
        elif toks[0] == "meta" and toks[1] in ("ports", "sources"):
            val = toks[2] if len(toks) > 2 else "-"
            meta[toks[1]] = [] if val == "-" else val.split(",")
        elif toks[0] == "meta" and toks[1] == "basis":
            basis_counts = (int(toks[2]), int(toks[3]))
        elif toks[0] == "matrix":
            name, rows, cols, kind = toks[1], int(toks[2]), int(toks[3]), toks[4]
            data = []
            for r in range(rows):
                vals = lines[i + r].split()
                if len(vals) != cols:
                    raise ParseError(f"matrix {name}: row {r} has {len(vals)} "
                                     f"values, expected {cols}", i + r + 1)
                data.append([float(v) for v in vals])
            i += rows
            arr = np.array(data) if rows else np.zeros((0, cols))
            matrices[name] = arr.astype(np.int64) if kind == "i" else arr
        else:
            raise ParseError(f"unrecognized cache line: {line!r}", i)

    net = parse_model(model_text) if model_text else None
    ports = tuple(meta.get("ports", []))
    sources = tuple(meta.get("sources", []))

    if "R_I" in matrices:
        needed = {"L_I", "R_D", "L_D", "M0", "LIFT", "K"}
        missing = needed - set(matrices)
        if missing:
            raise ParseError(f"cache is missing matrices: {sorted(missing)}", None)
        basis = None
        if basis_counts is not None and "W" in matrices:
            basis = CurrentBasis(w=matrices["W"].astype(np.int64),
                                 n_cycles=basis_counts[0], n_paths=basis_counts[1])
        rm = ReducedModel(
            r_i=linalg.SymMatrix(matrices["R_I"]),
            l_i=linalg.SymMatrix(matrices["L_I"]),
            r_d=matrices["R_D"], l_d=matrices["L_D"], m0=matrices["M0"],
            lift=matrices["LIFT"], k=matrices["K"], basis=basis,
            source_names=sources, port_names=ports)
        return rm, net
    if {"R_X", "L_X", "E"} <= set(matrices):
        rm = project_external(matrices["R_X"], matrices["L_X"],
                              matrices["E"].astype(np.int64), port_names=ports)
        return rm, net
    raise ParseError("cache holds neither a reduced model nor an R_X/L_X/E triple", None)
