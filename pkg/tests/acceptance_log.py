"""Collects one verdict per acceptance criterion for the terminal summary."""

RESULTS: dict = {}


def record(criterion: str, label: str, ok: bool, detail: str = "") -> None:
    RESULTS.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"[acceptance {criterion}] {label}: {'PASS' if ok else 'FAIL'} {detail}")


def summary_lines() -> list:
    lines = []
    for crit in sorted(RESULTS, key=lambda c: int(c)):
        items = RESULTS[crit]
        ok = all(i[1] for i in items)
        failed = ", ".join(i[0] for i in items if not i[1])
        tail = f" (failed: {failed})" if failed else ""
        lines.append(f"criterion {crit}: {'PASS' if ok else 'FAIL'}{tail}")
    return lines
