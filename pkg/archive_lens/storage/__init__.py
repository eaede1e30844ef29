"""Storage implementations for archive data."""

from archive_lens.storage.memory_store import MemoryStore
from archive_lens.storage.file_store import FileStore, write_csv, write_text
