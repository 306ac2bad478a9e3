# beeping/__main__.py — beeplab
import sys

from beeping.cli import main

sys.exit(main())
