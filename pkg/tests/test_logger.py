import logging

from core.utils.logger import CentralizedLogger, ExtraFieldsFormatter


def _record(**extra):
    record = logging.LogRecord("sim.test", logging.INFO, __file__, 1, "point done", None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


def test_extra_fields_are_appended_sorted():
    line = ExtraFieldsFormatter("%(message)s").format(_record(seed=7, experiment="latency"))
    assert line == "point done | experiment=latency seed=7"


def test_plain_record_is_unchanged():
    assert ExtraFieldsFormatter("%(levelname)s %(message)s").format(_record()) == "INFO point done"


def test_level_names_parse_case_insensitively():
    assert CentralizedLogger.parse_level("debug") == logging.DEBUG
    assert CentralizedLogger.parse_level("Warning") == logging.WARNING
    assert CentralizedLogger.parse_level("loud") is None
