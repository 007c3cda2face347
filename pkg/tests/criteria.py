"""One pass/fail line per acceptance criterion, echoed in the pytest summary."""

LINES = {}


def record(k, checks):
    """Print and store the verdict for criterion ``k``.

    ``checks`` is a list of ``(label, ok, detail)``; the criterion passes
    when every check does.  Returns the failing labels.
    """
    failed = [label for label, ok, _ in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    parts = [f"{label}={'ok' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
             for label, ok, detail in checks]
    line = f"CRITERION {k}: {status}  " + "; ".join(parts)
    LINES[k] = line
    print(line)
    return failed
