import sys

from ltcnav.cli.main import main

sys.exit(main())
