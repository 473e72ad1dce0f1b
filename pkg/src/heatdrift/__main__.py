import sys

from heatdrift.cli import main

sys.exit(main())
