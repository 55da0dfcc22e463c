"""Audit Unit Tests"""
import logging as stdlib_logging
import unittest

from . import logging
from .logging import LOGGER, LogLevel, format_line

class Capture(stdlib_logging.Handler):
    """Keeps formatted messages in memory."""
    def __init__(self):
        super().__init__()
        self.lines = []

    def emit(self, record):
        self.lines.append(record.getMessage())

class TestLogging(unittest.TestCase):
    """Test the logging facade."""
    def setUp(self):
        """Attach a capture handler at debug level"""
        self.capture = Capture()
        self.level = LOGGER.level
        LOGGER.addHandler(self.capture)
        LOGGER.setLevel(stdlib_logging.DEBUG)

    def tearDown(self):
        """Detach the capture handler"""
        LOGGER.removeHandler(self.capture)
        LOGGER.setLevel(self.level)

    def test_caller(self):
        """Records name the calling function and file"""
        logging.info('hello')
        self.assertEqual(len(self.capture.lines), 1)
        level, _, where, function, message = self.capture.lines[0].split('|')
        self.assertEqual(level, 'INFO')
        self.assertTrue(where.startswith('audit/test.py:L'))
        self.assertEqual(function, 'test_caller')
        self.assertEqual(message, 'hello')

    def test_multiline(self):
        """One record per line"""
        logging.error('first\nsecond')
        self.assertEqual([line.split('|')[-1] for line in self.capture.lines], ['first', 'second'])

    def test_level_filter(self):
        """Records below the logger level are dropped"""
        LOGGER.setLevel(stdlib_logging.WARNING)
        logging.debug('quiet')
        logging.info('quiet')
        logging.warning('loud')
        logging.critical('loud')
        self.assertEqual(len(self.capture.lines), 2)

    def test_timed(self):
        """Elapsed time is attributed to the with statement"""
        with logging.timed('block'):
            pass
        _, _, _, function, message = self.capture.lines[0].split('|')
        self.assertEqual(function, 'test_timed')
        self.assertRegex(message, r'^block: \d+\.\d{3}s$')

    def test_format_line(self):
        """Two trailing path components"""
        line = format_line(LogLevel.DEBUG, '/a/b/pkg/mod.py', 7, 'f', 'text')
        self.assertTrue(line.startswith('DEBUG|'))
        self.assertTrue(line.endswith('|pkg/mod.py:L7|f|text'))

if __name__ == '__main__':
    unittest.main()
