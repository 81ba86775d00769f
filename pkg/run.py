import sys

from app import create_cli

if __name__ == '__main__':
    main = create_cli()
    sys.exit(main(sys.argv[1:]))
