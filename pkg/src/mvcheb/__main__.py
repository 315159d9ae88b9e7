import sys

from mvcheb.cli import main

sys.exit(main())
