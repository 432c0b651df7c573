import logging
import json
import time
from contextlib import contextmanager
from django.utils import timezone

# Configure audit logger
audit_logger = logging.getLogger('dunes.audit')


def _jsonable(value):
    """
    Coerce numpy scalars, complex numbers and tuples into JSON-friendly values
    """
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if hasattr(value, 'item') and callable(value.item):
        return _jsonable(value.item())
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def log_run(event, **fields):
    """
    Write one structured audit entry for a solver run
    """
    entry = {
        'timestamp': timezone.now().isoformat(),
        'event': event,
    }
    entry.update({key: _jsonable(value) for key, value in fields.items()})
    audit_logger.info(json.dumps(entry, sort_keys=True, default=str))


@contextmanager
def audited(event, **fields):
    """
    Time a block and log it as one audit entry; failures are logged with their message
    """
    start_time = time.perf_counter()
    outcome = {}
    try:
        yield outcome
    except Exception as exc:
        log_run(event, status='failed', error=str(exc),
                duration_seconds=time.perf_counter() - start_time, **fields)
        raise
    log_run(event, status='ok', duration_seconds=time.perf_counter() - start_time,
            **fields, **outcome)
