"""Re-verification of serialized certificates, by kind."""

from __future__ import annotations

from . import certio
from .line import VerifyReport

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNDECIDED = 2


def verify_document(doc: dict) -> VerifyReport:
    """Dispatch on the certificate kind; raises SchemaError for unknown documents."""
    if doc.get("schema") != certio.SCHEMA:
        raise certio.SchemaError(f"not a {certio.SCHEMA} document")
    kind = doc.get("kind")
    try:
        if kind == "witness-line":
            from .line import verify_line

            return verify_line(doc)
        if kind == "witness-bundle":
            from .bundle import verify_bundle

            return verify_bundle(doc)
        if kind == "witness-mult":
            from .algebra import verify_mult

            return verify_mult(doc)
    except certio.SchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise certio.SchemaError(f"malformed {kind} certificate: {exc}") from exc
    raise certio.SchemaError(f"unknown certificate kind {kind!r}")


def exit_code(report: VerifyReport) -> int:
    if report.ok:
        return EXIT_OK
    if report.undecided:
        return EXIT_UNDECIDED
    return EXIT_INVALID


def verify_path(path) -> tuple[int, VerifyReport | None, str]:
    """(exit code, report or None, message) for a certificate file."""
    try:
        doc = certio.read(path)
        report = verify_document(doc)
    except certio.SchemaError as exc:
        return EXIT_INVALID, None, str(exc)
    code = exit_code(report)
    failed = [name for name, ok, _ in report.checks if not ok]
    msg = "verified" if code == EXIT_OK else ("undecided" if code == EXIT_UNDECIDED else "failed: " + ", ".join(failed))
    return code, report, msg
