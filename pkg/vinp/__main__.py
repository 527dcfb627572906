import sys

from vinp.cli import main

sys.exit(main())
