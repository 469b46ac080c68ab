"""The `.pgm` module file format.

A versioned text format: a header (p, n, window, rank, truncation, optional
metadata), three matrix blocks with series entries `c*X^e + ...`, and an
optional character block.  Every entry may carry its own certified window
via a trailing `@ hi` annotation (`@ inf` marks exact Laurent polynomials);
entries without the annotation default to the header window.

Loading revalidates the module invariants (etale determinant, commutation)
and fails loudly on violation.
"""

from .errors import FormatError
from .etale import EtaleModule
from .padics import UnitChar
from .series import INF, OESeries, parse_series, render_series

FORMAT_VERSION = 1


def render_entry(f, default_hi):
    text = render_series(f)
    if f.hi == INF:
        return text + " @ inf" if default_hi != INF else text
    if f.hi == default_hi:
        return text
    return f"{text} @ {f.hi}"


def parse_entry(text, p, n, default_hi):
    if "@" in text:
        body, _, win = text.rpartition("@")
        win = win.strip()
        hi = INF if win == "inf" else int(win)
    else:
        body, hi = text, default_hi
    return parse_series(body.strip(), p, n, hi=hi)


def render_module(module):
    lines = [f"pgm {FORMAT_VERSION}",
             f"p: {module.p}",
             f"n: {module.n}",
             f"lo: {module.window[0]}",
             f"hi: {module.window[1]}",
             f"rank: {module.rank}",
             f"truncation: {module.truncation}"]
    if module.name:
        lines.append(f"name: {module.name}")
    if module.comment:
        lines.append(f"comment: {module.comment}")
    default_hi = module.window[1]

    def block(tag, mat):
        lines.append(f"[{tag}]")
        for row in mat:
            lines.append(" ; ".join(render_entry(e, default_hi) for e in row))

    block("phi", module.mat_phi)
    if module.mat_gamma_top is not None:
        block("gamma_top", module.mat_gamma_top)
    if module.mat_gamma_tor is not None:
        block("gamma_tor", module.mat_gamma_tor)
    if module.omega is not None:
        lines.append("[omega]")
        lines.append(f"value_at_p: {module.omega.value_at_p}")
        lines.append(f"exponent_j: {module.omega.exponent_j}")
        lines.append(f"torsion_value: {module.omega.torsion_value}")
    return "\n".join(lines) + "\n"


def parse_module(text, validate=True):
    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("pgm"):
        raise FormatError("missing `pgm <version>` header line")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise FormatError("malformed version header") from None
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")

    header = {}
    blocks = {}
    current = None
    for ln in lines[1:]:
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            blocks[current] = []
        elif current is None:
            key, _, val = ln.partition(":")
            if not _:
                raise FormatError(f"malformed header line {ln!r}")
            header[key.strip()] = val.strip()
        else:
            blocks[current].append(ln)

    try:
        p = int(header["p"])
        n = int(header["n"])
        lo = int(header["lo"])
        hi = int(header["hi"])
        rank = int(header["rank"])
        truncation = int(header["truncation"])
    except KeyError as exc:
        raise FormatError(f"missing header field {exc}") from None

    def read_matrix(tag):
        if tag not in blocks:
            return None
        rows = blocks[tag]
        if len(rows) != rank:
            raise FormatError(f"block [{tag}] has {len(rows)} rows, expected {rank}")
        mat = []
        for row in rows:
            entries = [parse_entry(e, p, n, hi) for e in row.split(";")]
            if len(entries) != rank:
                raise FormatError(f"row in [{tag}] has {len(entries)} entries")
            mat.append(tuple(entries))
        return tuple(mat)

    mat_phi = read_matrix("phi")
    if mat_phi is None:
        raise FormatError("missing [phi] block")
    mat_gamma_top = read_matrix("gamma_top")
    mat_gamma_tor = read_matrix("gamma_tor")
    if (mat_gamma_top is None) != (mat_gamma_tor is None):
        raise FormatError("gamma blocks must come in pairs")

    omega = None
    if "omega" in blocks:
        fields = {}
        for ln in blocks["omega"]:
            key, _, val = ln.partition(":")
            fields[key.strip()] = int(val.strip())
        omega = UnitChar(p, n,
                         value_at_p=fields.get("value_at_p", 1),
                         exponent_j=fields.get("exponent_j", 0),
                         torsion_value=fields.get("torsion_value", 1))

    module = EtaleModule(p, n, mat_phi, mat_gamma_top, mat_gamma_tor,
                         omega=omega, window=(lo, hi), truncation=truncation,
                         name=header.get("name", ""),
                         comment=header.get("comment", ""))
    if validate and not module.check_etale():
        raise FormatError("module fails revalidation (etale/commutation invariants)")
    return module


def save_module(module, path):
    with open(path, "w") as fh:
        fh.write(render_module(module))


def load_module(path, validate=True):
    with open(path) as fh:
        return parse_module(fh.read(), validate=validate)
