from collections import defaultdict

from sortedcontainers import SortedDict

from src.runtime.memory import RuntimeObjectRecord


class StaticGrouping:
    """
    Live run-time objects grouped by the static object they were
    allocated from, as seen through the events consumed so far.
    """

    def __init__(self):
        self._groups: dict[int, SortedDict] = defaultdict(SortedDict)

    def add(self, record: RuntimeObjectRecord) -> None:
        self._groups[record.static_id][record.start] = record

    def remove(self, record: RuntimeObjectRecord) -> bool:
        group = self._groups.get(record.static_id)
        if group is None or record.start not in group:
            return False
        del group[record.start]
        return True

    def members(self, static_id: int) -> list[RuntimeObjectRecord]:
        group = self._groups.get(static_id)
        return list(group.values()) if group else []

    def snapshot(self) -> dict[int, set[RuntimeObjectRecord]]:
        return {static_id: set(group.values()) for static_id, group in self._groups.items() if group}

    def __len__(self) -> int:
        return sum(len(group) for group in self._groups.values())
