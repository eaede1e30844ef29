"""Archive-lens: content and style analysis of historical photo archives."""

# Load environment variables at the earliest possible point
import os
from dotenv import load_dotenv

load_dotenv()
load_dotenv(os.path.join(os.path.dirname(__file__), '.env'))

from archive_lens.system import ArchiveLensSystem, PipelineConfig

__version__ = "0.1.0"
