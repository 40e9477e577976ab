from media_extractor.cli import main

main()
