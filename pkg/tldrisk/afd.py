import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union
from tldrisk.exceptions import AfdValidationError, IntegrityError, NotFoundError
from tldrisk.helpers import Document, build_model, dump_document, find_duplicates, parse_document, require_key
from tldrisk.models import Afd, AfdEdge, AfdNode, AttackCatalog, Marking, NodeKindEnum, NoveltyEnum, ValidationReport

logger = logging.getLogger(__name__)

# Graphviz attributes per node kind. LogicalEncapsulation is drawn as a cluster instead.
NODE_STYLES: Dict[NodeKindEnum, Dict[str, str]] = {
    NodeKindEnum.COMPONENT: {"shape": "box"},
    NodeKindEnum.SUBCOMPONENT: {"shape": "box3d"},
    NodeKindEnum.TERMINATOR: {"shape": "oval"},
    NodeKindEnum.NETWORK: {"shape": "ellipse", "style": "filled", "fillcolor": "lightgrey", "peripheries": "2"},
    NodeKindEnum.OUTER_COMPONENT: {"shape": "box", "style": "dashed"},
}
CLUSTER_STYLE = {"style": "rounded"}
NOVELTY_COLORS = {
    NoveltyEnum.KNOWN: "blue",
    NoveltyEnum.NEW: "red",
}
MIXED_NOVELTY_COLOR = "purple"
BOLD_PENWIDTH = "2"

def load_afd(document: Document) -> Afd:
    """
    Loads one attack flow diagram document.

    Args:
        document (str | dict): JSON text (or decoded object) with `id`, `title`, `nodes` and `edges`.

    Returns:
        afd (Afd): The diagram. Structural rules are checked by `validate_afd`, not here.
    """
    data = parse_document(document, label="AFD")
    nodes = require_key(data, "nodes", label="AFD")
    duplicates = find_duplicates(n.get("id") for n in nodes if isinstance(n, dict) and n.get("id") is not None)
    if duplicates:
        raise IntegrityError(f"AFD {data.get('id')}: duplicate node id(s): {', '.join(duplicates)}")

    afd = build_model(Afd, data, label=f"AFD {data.get('id', '')}".strip())
    logger.debug("Loaded AFD %s with %d nodes and %d edges", afd.id, len(afd.nodes), len(afd.edges))
    return afd

def dump_afd(afd: Afd) -> str:
    return dump_document(afd)

def _validate_diagram(
    report: ValidationReport,
    afd: Afd,
    diagram_ids: Optional[Set[str]],
    attack_ids: Optional[Set[str]],
) -> None:
    nodes = afd.nodes
    for key, node in nodes.items():
        if key != node.id:
            report.add_error("id_mismatch", f"node key {key} holds node {node.id}", subject=key, document=afd.id)

        if node.expands_to is not None:
            if node.kind != NodeKindEnum.SUBCOMPONENT:
                report.add_error(
                    "expansion_on_non_subcomponent",
                    f"{node.kind.value} node may not expand to another diagram",
                    subject=node.id, document=afd.id,
                )
            elif diagram_ids is not None and node.expands_to not in diagram_ids:
                report.add_error(
                    "unresolved_expansion",
                    f"expands to unknown diagram {node.expands_to}",
                    subject=node.id, document=afd.id,
                )

        if node.parent is not None:
            parent = nodes.get(node.parent)
            if parent is None:
                report.add_error("unresolved_parent", f"parent {node.parent} not in diagram", subject=node.id, document=afd.id)
            elif parent.kind != NodeKindEnum.LOGICAL_ENCAPSULATION:
                report.add_error(
                    "parent_not_encapsulation",
                    f"parent {node.parent} is a {parent.kind.value}, not a LogicalEncapsulation",
                    subject=node.id, document=afd.id,
                )

    # Containment must be a forest.
    for node in nodes.values():
        seen = {node.id}
        current = node.parent
        while current is not None and current in nodes:
            if current in seen:
                report.add_error("parent_cycle", "encapsulation parents form a cycle", subject=node.id, document=afd.id)
                break
            seen.add(current)
            current = nodes[current].parent

    seen_edges: Set[Tuple[str, str]] = set()
    for edge in afd.edges:
        edge_name = f"{edge.source}->{edge.target}"
        for endpoint in (edge.source, edge.target):
            node = nodes.get(endpoint)
            if node is None:
                report.add_error("dangling_endpoint", f"endpoint {endpoint} not in diagram", subject=edge_name, document=afd.id)
            elif node.kind == NodeKindEnum.LOGICAL_ENCAPSULATION:
                report.add_error(
                    "encapsulation_endpoint",
                    f"endpoint {endpoint} is a LogicalEncapsulation",
                    subject=edge_name, document=afd.id,
                )
        if edge.source == edge.target:
            report.add_error("self_loop", "edge endpoints must differ", subject=edge_name, document=afd.id)
        if edge.key in seen_edges:
            report.add_error("duplicate_edge", "edge appears more than once", subject=edge_name, document=afd.id)
        seen_edges.add(edge.key)

        if attack_ids is None:
            continue
        for marking in sorted(edge.markings, key=lambda m: m.attack):
            if marking.attack not in attack_ids:
                report.add_error(
                    "unresolved_marking",
                    f"marking names unknown attack {marking.attack}",
                    subject=edge_name, document=afd.id,
                )

def validate_afd(
    diagrams: Iterable[Afd],
    attack_ids: Optional[Iterable[str]] = None,
) -> ValidationReport:
    """
    Validates a set of diagrams together, so that `expands_to` can resolve across them.

    Args:
        diagrams (Iterable[Afd]): The diagram set.
        attack_ids (Iterable[str]): Known attack ids. When given, every marking must name one of them.

    Returns:
        report (ValidationReport): Empty `errors` iff every diagram is valid.
    """
    diagrams = list(diagrams)
    report = ValidationReport()
    for duplicate in find_duplicates(d.id for d in diagrams):
        report.add_error("duplicate_diagram", "diagram id appears more than once", subject=duplicate)

    diagram_ids = {d.id for d in diagrams}
    attack_id_set = set(attack_ids) if attack_ids is not None else None
    for afd in diagrams:
        _validate_diagram(report, afd, diagram_ids, attack_id_set)

    return report

def cross_check_novelty(diagrams: Iterable[Afd], attacks: AttackCatalog) -> ValidationReport:
    """
    Checks that diagram markings agree with the attack catalog.

    Every marking's novelty must equal the attack's novelty, diagrams that name
    a device may only carry that device's attacks, and each catalog attack must
    be marked in exactly one device's diagrams.
    """
    report = ValidationReport()
    marked_devices: Dict[str, Set[str]] = defaultdict(set)
    for afd in diagrams:
        for edge in afd.edges:
            edge_name = f"{edge.source}->{edge.target}"
            for marking in sorted(edge.markings, key=lambda m: m.attack):
                attack = attacks.attacks.get(marking.attack)
                if attack is None:
                    continue
                marked_devices[attack.id].add(afd.device or attack.device)
                if marking.novelty != attack.novelty:
                    report.add_error(
                        "novelty_mismatch",
                        f"{attack.id} is {attack.novelty.value} in the catalog but marked {marking.novelty.value}",
                        subject=edge_name, document=afd.id,
                    )
                if afd.device is not None and afd.device != attack.device:
                    report.add_error(
                        "device_mismatch",
                        f"{attack.id} belongs to {attack.device}, diagram describes {afd.device}",
                        subject=edge_name, document=afd.id,
                    )

    for attack_id in attacks.attacks:
        devices = marked_devices.get(attack_id, set())
        if not devices:
            report.add_error("unmarked_attack", "attack is not marked on any diagram", subject=attack_id)
        elif len(devices) > 1:
            report.add_error(
                "attack_in_several_devices",
                f"attack is marked in diagrams of {', '.join(sorted(devices))}",
                subject=attack_id,
            )

    return report

def mark_attack(
    afd: Afd,
    edge: Tuple[str, str],
    attack_id: str,
    novelty: Union[NoveltyEnum, str],
) -> Afd:
    """
    Marks an attack on one edge, returning an updated copy of the diagram.

    Marking the same (attack, novelty) pair twice gives an equal diagram.

    Args:
        afd (Afd): Diagram to mark.
        edge (Tuple[str, str]): The `(from, to)` node ids of the edge.
        attack_id (str): Attack id, e.g. `A1`.
        novelty (NoveltyEnum | str): `known` (drawn blue) or `new` (drawn red).

    Returns:
        afd (Afd): A new diagram; the input is left unchanged.
    """
    marking = Marking(attack=attack_id, novelty=novelty)
    edges = list(afd.edges)
    for index, candidate in enumerate(edges):
        if candidate.key == tuple(edge):
            edges[index] = candidate.model_copy(update={"markings": candidate.markings | {marking}})
            return afd.model_copy(update={"edges": tuple(edges)})

    raise NotFoundError(f"no edge {edge[0]} -> {edge[1]} in diagram {afd.id}", key=tuple(edge))

def attack_surface(diagrams: Iterable[Afd], node_id: str) -> frozenset[str]:
    """
    Collects every attack that can reach or leave a node.

    This is the union of markings on edges incident to the node, in every diagram
    that contains it, plus every marking inside the diagrams the node expands to
    (followed transitively).

    Args:
        diagrams (Iterable[Afd]): The diagram set.
        node_id (str): Node id, e.g. `host_control_pc`.

    Returns:
        attack_ids (frozenset[str]): Attack ids on the node's surface.
    """
    diagrams = list(diagrams)
    by_id = {d.id: d for d in diagrams}
    containing = [d for d in diagrams if node_id in d.nodes]
    if not containing:
        raise NotFoundError(f"unknown AFD node: {node_id}", key=node_id)

    surface: Set[str] = set()
    pending: List[str] = []
    for afd in containing:
        for edge in afd.edges:
            if node_id in edge.key:
                surface |= edge.attack_ids
        expansion = afd.nodes[node_id].expands_to
        if expansion is not None:
            pending.append(expansion)

    visited: Set[str] = set()
    while pending:
        diagram_id = pending.pop()
        if diagram_id in visited or diagram_id not in by_id:
            continue
        visited.add(diagram_id)
        expanded = by_id[diagram_id]
        for edge in expanded.edges:
            surface |= edge.attack_ids
        pending.extend(n.expands_to for n in expanded.nodes.values() if n.expands_to is not None)

    return frozenset(surface)

def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'

def _attributes(attrs: Dict[str, str]) -> str:
    return ", ".join(f"{key}={_quote(value)}" for key, value in attrs.items())

def edge_color(edge: AfdEdge) -> Optional[str]:
    """Blue for known-only markings, red for new-only, purple when mixed, None when unmarked."""
    novelties = {m.novelty for m in edge.markings}
    if not novelties:
        return None
    if len(novelties) > 1:
        return MIXED_NOVELTY_COLOR
    return NOVELTY_COLORS[novelties.pop()]

def export_dot(afd: Afd) -> str:
    """
    Renders a diagram as Graphviz DOT text.

    Output is a pure function of the diagram: nodes, clusters and edges are
    emitted in sorted id order.

    Args:
        afd (Afd): A structurally valid diagram.

    Returns:
        dot (str): The DOT document.
    """
    report = ValidationReport()
    _validate_diagram(report, afd, diagram_ids=None, attack_ids=None)
    if not report.is_valid:
        raise AfdValidationError(f"AFD {afd.id} is invalid", issues=report.errors)

    children: Dict[Optional[str], List[AfdNode]] = defaultdict(list)
    for node in afd.nodes.values():
        children[node.parent].append(node)

    lines = [f"digraph {_quote(afd.id)} {{"]
    if afd.title:
        lines.append(f"  label={_quote(afd.title)};")
        lines.append('  labelloc="t";')

    def emit(parent: Optional[str], depth: int) -> None:
        indent = "  " * depth
        for node in sorted(children.get(parent, []), key=lambda n: n.id):
            if node.kind == NodeKindEnum.LOGICAL_ENCAPSULATION:
                lines.append(f"{indent}subgraph {_quote('cluster_' + node.id)} {{")
                lines.append(f"{indent}  label={_quote(node.label)};")
                for key, value in CLUSTER_STYLE.items():
                    lines.append(f"{indent}  {key}={_quote(value)};")
                emit(node.id, depth + 1)
                lines.append(f"{indent}}}")
            else:
                attrs = {"label": node.label, **NODE_STYLES[node.kind]}
                if node.expands_to is not None:
                    attrs["tooltip"] = f"expands to {node.expands_to}"
                lines.append(f"{indent}{_quote(node.id)} [{_attributes(attrs)}];")

    emit(None, 1)

    for edge in sorted(afd.edges, key=lambda e: e.key):
        attrs: Dict[str, str] = {}
        if edge.label:
            attrs["label"] = edge.label
        color = edge_color(edge)
        if color is not None:
            attrs["penwidth"] = BOLD_PENWIDTH
            attrs["color"] = color
            attrs["xlabel"] = ", ".join(sorted(edge.attack_ids))
        suffix = f" [{_attributes(attrs)}]" if attrs else ""
        lines.append(f"  {_quote(edge.source)} -> {_quote(edge.target)}{suffix};")

    lines.append("}")
    return "\n".join(lines) + "\n"
