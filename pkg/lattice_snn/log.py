import logging
from pathlib import Path


class RunLogFileHandler(logging.FileHandler):
    """FileHandler that opens lazily and creates its directory on first write."""

    def __init__(self, filename, mode='a', encoding='utf-8'):
        super().__init__(filename, mode=mode, encoding=encoding, delay=True)

    def _open(self):
        Path(self.baseFilename).parent.mkdir(parents=True, exist_ok=True)
        return super()._open()
