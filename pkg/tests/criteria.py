"""Bookkeeping for the acceptance checks: one pass/fail line per criterion."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Report:
    results: dict[int, tuple[str, bool, str]] = field(default_factory=dict)

    def record(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        self.results[number] = (title, bool(passed), detail)
        line = self.format(number)
        print(line)
        return bool(passed)

    def format(self, number: int) -> str:
        title, ok, detail = self.results[number]
        tail = f" ({detail})" if detail else ""
        return f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}{tail}"

    def lines(self) -> list[str]:
        return [self.format(k) for k in sorted(self.results)]

    def __bool__(self) -> bool:
        return bool(self.results)


REPORT = Report()
