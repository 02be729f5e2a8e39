"""Command line front end.

Subgroup files hold a ``rank N`` line followed by one generator word per
line; ``#`` starts a comment and blank lines are skipped.  Decision commands
exit 0 for yes and 1 for no; malformed input, rank mismatches and exhausted
search budgets exit 2.  Diagnostics always go to stderr.
"""

from __future__ import annotations

import json
import logging
import sys
from typing import Optional

import click

from . import stallings as st
from .echelon import EchelonSolver, SearchBudgetExceeded, echelon_certificate, verify_echelon_basis
from .stallings import SubgroupSpec
from .whitehead import free_factor_support, is_free_factor, reduce_to_rose
from .words import parse_word

YES, NO, ERROR = 0, 1, 2


class CommandError(click.ClickException):
    exit_code = ERROR


def parse_subgroup_text(text: str, rank: Optional[int] = None, source: str = "<input>") -> SubgroupSpec:
    """Parse the subgroup file format.  ``rank`` is used when the header is
    missing (basis files may omit it)."""
    words = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        if head[0] == "rank" and rank is None and not words:
            if len(head) != 2 or not head[1].isdigit():
                raise ValueError(f"{source}:{lineno}: expected 'rank N'")
            rank = int(head[1])
            continue
        if rank is None:
            raise ValueError(f"{source}:{lineno}: missing 'rank N' header")
        try:
            words.append(parse_word(line, rank))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    if rank is None:
        raise ValueError(f"{source}: missing 'rank N' header")
    return SubgroupSpec(rank, tuple(words))


def _load(path: str, rank: Optional[int] = None) -> SubgroupSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CommandError(str(exc)) from None
    try:
        return parse_subgroup_text(text, rank, path)
    except ValueError as exc:
        raise CommandError(str(exc)) from None


def _options(f):
    """Shared flags, accepted both before and after the command name."""
    f = click.option("--format", "fmt", type=click.Choice(["json", "dot", "text"]), default=None)(f)
    f = click.option("--trace", is_flag=True, default=None, help="Log each step to stderr.")(f)
    f = click.option("--jobs", type=click.IntRange(min=1), default=None, help="Worker processes for the search.")(f)
    f = click.option("--max-nodes", type=click.IntRange(min=1), default=None, help="Abort after this many search nodes.")(f)
    return f


def _settings(ctx: click.Context, fmt, trace, jobs, max_nodes) -> dict:
    base = ctx.find_root().obj or {}
    out = {
        "fmt": fmt or base.get("fmt") or "json",
        "trace": bool(trace or base.get("trace")),
        "jobs": jobs or base.get("jobs") or 1,
        "max_nodes": max_nodes or base.get("max_nodes"),
    }
    if out["trace"]:
        logger = logging.getLogger("fgsub")
        if not logger.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter("%(message)s"))
            logger.addHandler(handler)
        logger.setLevel(logging.INFO)
    return out


def _emit_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _no_dot(opts: dict) -> None:
    if opts["fmt"] == "dot":
        raise CommandError("--format dot is only available for graph output")


def _graph_text(g: st.LabeledGraph) -> str:
    d = st.to_dict(g)
    lines = [
        f"rank {st.graph_rank(g)} subgroup of F_{g.rank}",
        f"vertices {len(d['vertices'])}, edge pairs {len(d['edges'])}, basepoint {d['basepoint']}",
    ]
    lines += [f"{e['from']} -{e['label']}-> {e['to']}" for e in d["edges"]]
    return "\n".join(lines)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@_options
@click.pass_context
def main(ctx, fmt, trace, jobs, max_nodes):
    """Subgroups of free groups: foldings, free factors and echelon tests."""
    ctx.obj = {"fmt": fmt, "trace": trace, "jobs": jobs, "max_nodes": max_nodes}


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def fold(ctx, file, **kw):
    """Print the pointed core graph of the subgroup."""
    opts = _settings(ctx, **kw)
    g = st.build_pointed_core(_load(file))
    if opts["fmt"] == "dot":
        click.echo(st.to_dot(g), nl=False)
    elif opts["fmt"] == "text":
        click.echo(_graph_text(g))
    else:
        _emit_json(st.to_dict(g))


@main.command()
@click.argument("file1", type=click.Path(dir_okay=False))
@click.argument("file2", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def intersect(ctx, file1, file2, **kw):
    """Print the pointed core of the intersection and a basis for it."""
    opts = _settings(ctx, **kw)
    s1, s2 = _load(file1), _load(file2)
    if s1.rank != s2.rank:
        raise CommandError(f"rank mismatch: {s1.rank} vs {s2.rank}")
    g = st.pullback_intersection(st.build_pointed_core(s1), st.build_pointed_core(s2))
    g = st.renumber(g)
    basis = [str(w) for w in st.spanning_tree_basis(g)]
    if opts["fmt"] == "dot":
        for w in basis:
            click.echo(f"// basis {w}")
        click.echo(st.to_dot(g, "intersection"), nl=False)
    elif opts["fmt"] == "text":
        click.echo(_graph_text(g))
        click.echo("basis: " + (" ".join(basis) if basis else "(trivial)"))
    else:
        _emit_json({"graph": st.to_dict(g), "basis": basis})


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def rank(ctx, file, **kw):
    """Print the rank of the subgroup."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    r = st.graph_rank(st.build_pointed_core(_load(file)))
    if opts["fmt"] == "text":
        click.echo(r)
    else:
        _emit_json({"rank": r})


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.argument("word")
@_options
@click.pass_context
def member(ctx, file, word, **kw):
    """Exit 0 if WORD lies in the subgroup, 1 otherwise."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    spec = _load(file)
    try:
        w = parse_word(word, spec.rank)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    ok = st.contains(st.build_pointed_core(spec), w)
    if opts["fmt"] == "text":
        click.echo("yes" if ok else "no")
    else:
        _emit_json({"member": ok, "word": str(w)})
    ctx.exit(YES if ok else NO)


@main.command("is-free-factor")
@click.argument("file", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def is_free_factor_cmd(ctx, file, **kw):
    """Exit 0 if the subgroup is a free factor, 1 otherwise."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    spec = _load(file)
    g = st.build_pointed_core(spec)
    red = reduce_to_rose(g, normalize=False)
    if opts["trace"]:
        for phi, before, after in red.trace:
            click.echo(f"whitehead {phi}: {before} -> {after} edge pairs", err=True)
    ok = is_free_factor(g)
    if opts["fmt"] == "text":
        click.echo("yes" if ok else "no")
    else:
        _emit_json(
            {
                "free_factor": ok,
                "trace": [{"move": str(phi), "before": b, "after": a} for phi, b, a in red.trace],
            }
        )
    ctx.exit(YES if ok else NO)


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--verify", is_flag=True, help="Re-check the output is a free factor containing the generators.")
@_options
@click.pass_context
def ffg(ctx, file, verify, **kw):
    """Print a basis of the smallest free factor containing the subgroup."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    spec = _load(file)
    basis = free_factor_support(spec)
    if verify and basis:
        out = SubgroupSpec(spec.rank, tuple(basis))
        g = st.build_pointed_core(out)
        if not is_free_factor(out) or not all(st.contains(g, w) for w in spec.generators):
            raise CommandError("ffg verification failed")
    if opts["fmt"] == "text":
        for w in basis:
            click.echo(str(w))
    else:
        _emit_json({"basis": [str(w) for w in basis]})


@main.command("is-echelon")
@click.argument("file", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def is_echelon_cmd(ctx, file, **kw):
    """Exit 0 with a certificate if the subgroup is echelon, 1 if not."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    spec = _load(file)
    solver = EchelonSolver(max_nodes=opts["max_nodes"], jobs=opts["jobs"])
    try:
        flag = solver.is_echelon(spec)
    except SearchBudgetExceeded as exc:
        click.echo(f"error: {exc}; no verdict", err=True)
        click.echo(json.dumps({"explored": dict(sorted(solver.stats.items()))}, sort_keys=True), err=True)
        ctx.exit(ERROR)
    explored = dict(sorted(solver.stats.items()))
    if flag is None:
        if opts["fmt"] == "text":
            click.echo("not echelon: search exhausted")
            for level, count in explored.items():
                click.echo(f"{level} {count}")
        else:
            _emit_json({"echelon": False, "explored": explored})
        ctx.exit(NO)
    cert = echelon_certificate(spec, flag)
    # re-verify what will be printed, after a serialization round trip
    again = json.loads(json.dumps(cert))
    ordered = [parse_word(w, spec.rank) for w in again["basis"]]
    ok, ranks = verify_echelon_basis(spec, ordered)
    if not ok or ranks != again["prefix_ranks"]:
        raise CommandError("certificate failed re-verification")
    if opts["fmt"] == "text":
        click.echo("echelon")
        click.echo("basis: " + " ".join(cert["basis"]))
        click.echo("prefix ranks: " + " ".join(map(str, cert["prefix_ranks"])))
        for i, level in enumerate(cert["flag"], start=1):
            click.echo(f"B_{i}: " + " ".join(level))
    else:
        _emit_json(cert)
    ctx.exit(YES)


@main.command("verify-basis")
@click.argument("file", type=click.Path(dir_okay=False))
@click.argument("basis_file", type=click.Path(dir_okay=False))
@_options
@click.pass_context
def verify_basis(ctx, file, basis_file, **kw):
    """Exit 0 if BASIS_FILE is an echelon basis for the subgroup, 1 if not."""
    opts = _settings(ctx, **kw)
    _no_dot(opts)
    spec = _load(file)
    basis = _load_basis(basis_file, spec.rank)
    try:
        ok, ranks = verify_echelon_basis(spec, basis.generators)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    if opts["fmt"] == "text":
        click.echo(("echelon" if ok else "not echelon") + ": ranks " + " ".join(map(str, ranks)))
    else:
        _emit_json({"echelon_basis": ok, "prefix_ranks": ranks})
    ctx.exit(YES if ok else NO)


def _load_basis(path: str, rank: int) -> SubgroupSpec:
    """Basis files use the subgroup format; the rank header is optional."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CommandError(str(exc)) from None
    try:
        has_header = any(
            line.split("#", 1)[0].split()[:1] == ["rank"] for line in text.splitlines()
        )
        spec = parse_subgroup_text(text, None if has_header else rank, path)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    if spec.rank != rank:
        raise CommandError(f"rank mismatch: {spec.rank} vs {rank}")
    return spec


if __name__ == "__main__":  # pragma: no cover
    main()
