#!/usr/bin/env python3
"""Execution worker for `benchdelta grade`.

Reads one JSON request per line on stdin ({"source": ..., "timeout_ms": ...}),
defines the function in a fresh namespace, calls it without arguments and
answers with one JSON line: {"status": "ok"|"raised"|"no_value",
"error_class": ..., "value": ...}.
"""

import json
import signal
import sys


class _Timeout(BaseException):
    pass


def _on_alarm(signum, frame):
    raise _Timeout()


def _render(value):
    if isinstance(value, bool):
        return repr(value)
    if isinstance(value, (int, float)):
        return str(value)
    return repr(value)


def run(source, timeout_ms):
    namespace = {"__name__": "__benchdelta__"}
    signal.setitimer(signal.ITIMER_REAL, max(timeout_ms, 1) / 1000.0)
    try:
        code = compile(source, "<response>", "exec")
        exec(code, namespace)
        funcs = [v for k, v in namespace.items() if callable(v) and not k.startswith("__")]
        if not funcs:
            return {"status": "raised", "error_class": "NameError", "value": None}
        result = funcs[0]()
    except _Timeout:
        return {"status": "raised", "error_class": "TimeoutError", "value": None}
    except BaseException as exc:  # noqa: B902 - any failure is data here
        return {"status": "raised", "error_class": type(exc).__name__, "value": None}
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
    if result is None:
        return {"status": "no_value", "error_class": None, "value": None}
    try:
        return {"status": "ok", "error_class": None, "value": _render(result)}
    except BaseException as exc:
        return {"status": "raised", "error_class": type(exc).__name__, "value": None}


def main():
    signal.signal(signal.SIGALRM, _on_alarm)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            reply = run(req["source"], int(req.get("timeout_ms", 5000)))
        except (ValueError, KeyError, TypeError) as exc:
            reply = {"status": "raised", "error_class": type(exc).__name__, "value": None}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
