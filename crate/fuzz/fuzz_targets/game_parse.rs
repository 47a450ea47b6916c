#![no_main]

use libfuzzer_sys::fuzz_target;
use mlgame::game::MultiLevelGame;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(game) = MultiLevelGame::parse(text) {
        let again = MultiLevelGame::parse(&game.to_text()).expect("written game parses");
        assert_eq!(again.coalition, game.coalition);
        assert_eq!(again.default, game.default);
    }
});
