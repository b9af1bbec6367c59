"""DOT exports for quotient graphs, cutpoint trees, B_w graphs, and
resolutions (source 1-skeleton overlaid with vertex images)."""


def _quote(s):
    return '"' + str(s).replace('"', '\\"') + '"'


def gog_to_dot(g) -> str:
    lines = [f"graph {_quote(g.name)} {{"]
    for v in sorted(g.vertices):
        label = f"{v}\\n{g.vertices[v]}"
        flag = g.flags.get(v, "unknown")
        shape = {"rigid": "box", "flexible": "ellipse"}.get(flag, "plaintext")
        lines.append(f"  {_quote(v)} [label={_quote(label)}, shape={shape}];")
    for eid in sorted(g.edges):
        u, w, gid = g.edges[eid]
        lines.append(f"  {_quote(u)} -- {_quote(w)} [label={_quote(gid)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cutpoint_tree_to_dot(ct, name="cutpoints") -> str:
    lines = [f"graph {_quote(name)} {{"]
    for c in ct.comp_nodes:
        lines.append(f"  {_quote(c)} [shape=box, label={_quote(c + chr(10) + ct.node_stab[c])}];")
    for v in ct.cut_nodes:
        lines.append(f"  {_quote(v)} [shape=circle];")
    for a, b in sorted(ct.edges):
        lines.append(f"  {_quote(a)} -- {_quote(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def bw_to_dot(bw, name="bw") -> str:
    lines = [f"graph {_quote(name)} {{"]
    for c in bw.class_nodes:
        lines.append(f"  {_quote(c)} [shape=box];")
    for e in bw.edge_nodes:
        lines.append(f"  {_quote('e:' + e)} [shape=point, xlabel={_quote(e)}];")
    for c, e in sorted(bw.edges):
        lines.append(f"  {_quote(c)} -- {_quote('e:' + e)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def resolution_to_dot(res, name="resolution") -> str:
    x = res.source
    lines = [f"graph {_quote(name)} {{"]
    for v in sorted(x.vertices):
        img = res.vertex_image[v]
        shape = "doublecircle" if res.target.is_ideal(img) else "circle"
        lines.append(f"  {_quote(v)} [label={_quote(v + chr(10) + '->' + img)}, shape={shape}];")
    for eid in sorted(x.edges):
        u, v = x.edges[eid]
        crossings = len(res.crossings(eid))
        lines.append(f"  {_quote(u)} -- {_quote(v)} [label={_quote(f'{eid} ({crossings})')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
