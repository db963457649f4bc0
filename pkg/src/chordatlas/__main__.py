import sys

from src.chordatlas.main import main

sys.exit(main())
