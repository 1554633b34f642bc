import sys

from tempembed.cli import main

sys.exit(main())
