import sys

from flexcast.cli import main

sys.exit(main())
