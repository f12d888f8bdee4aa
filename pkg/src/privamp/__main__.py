import sys

from privamp.cli import main

sys.exit(main())
