from contextlib import contextmanager

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from adazeroLab.exceptions import AdaZeroError


@contextmanager
def command_errors():
    """Turns lab and config-validation failures into CommandError (nonzero exit)."""
    try:
        yield
    except ValidationError as exc:
        raise CommandError(f"invalid configuration: {exc.detail}") from exc
    except AdaZeroError as exc:
        raise CommandError(str(exc)) from exc
