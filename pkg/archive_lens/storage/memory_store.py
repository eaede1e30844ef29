"""In-memory store of archive photo records."""

from typing import Dict, List

from archive_lens.models import PhotoRecord
from archive_lens.utils import natural_key


class MemoryStore:
    """Photo records keyed by photo_id."""

    def __init__(self):
        self.photos: Dict[str, PhotoRecord] = {}

    def put_photo(self, photo: PhotoRecord) -> None:
        self.photos[photo.photo_id] = photo

    def list_photos(self) -> List[PhotoRecord]:
        """All records in canonical photo_id order."""
        return [self.photos[k] for k in sorted(self.photos, key=natural_key)]
