from src.analysis.objects import format_set, sort_nodes
from src.analysis.state import PointsToState


def export_facts(state: PointsToState) -> str:
    """
    Line-oriented dump of a solved state, stable across runs:

        pt <node> -> {targets}
        typeset <object> -> {types}
        call <function>:<index> -> @<callee>
        diag <function>:<index>: <message>
    """
    lines = [f"# stage {state.stage}"]
    for node in sort_nodes(state.pt):
        lines.append(f"pt {node} -> {format_set(state.pt[node])}")
    for target in sort_nodes(state.type_sets):
        names = ", ".join(sorted(state.type_sets[target]))
        lines.append(f"typeset {target} -> {{{names}}}")
    for (function, index), callee in sorted(state.call_graph):
        lines.append(f"call {function}:{index} -> @{callee}")
    for diagnostic in state.diagnostics:
        lines.append(f"diag {diagnostic}")
    return "\n".join(lines) + "\n"
