#!/bin/env python

import sys

from riskpool.misc import _generate_parser

"""
Example :
    $ python riskshare.py allocate --rule cmrs riskpool/tests/test_files/demo.json
    $ python riskshare.py verify --rule cmrs --battery seed=7 all
"""


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = _generate_parser().parse_args(argv)

    # Set up caching and import the checkers
    if args.cache:
        from riskpool import cache
        import joblib
        cache.memory = joblib.Memory('./cachedir', verbose=0)

    from riskpool import cli

    cli.configure_logging(args.verbose)
    return cli.run(args, argv)


if __name__ == '__main__':
    sys.exit(main())
